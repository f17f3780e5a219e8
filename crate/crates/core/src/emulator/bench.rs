use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ndn::{Face, FaceId, ForwarderConfig, ForwarderState, Name, Strategy};
use crate::topo::{
    compile_node_configs, node_name_prefix, LinkSpec, Medium, NodeConfig, NodeId, Topology,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    LinkConfig,
    Routing,
    Install,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: Phase,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSize {
    pub node: NodeId,
    /// FIB entries for other nodes' prefixes.
    pub remote_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub node_count: usize,
    pub prefixes_per_node: usize,
    pub phases: Vec<PhaseTiming>,
    pub table_sizes: Vec<TableSize>,
}

impl BenchReport {
    pub fn phase_seconds(&self, phase: Phase) -> f64 {
        self.phases
            .iter()
            .find(|p| p.phase == phase)
            .map_or(0.0, |p| p.seconds)
    }
}

/// Ring of `n` nodes with 1 ms links (a single link for two nodes).
pub fn ring_topology(n: usize) -> Topology {
    let labels = (0..n).map(|i| format!("N{i}")).collect();
    let mut links = Vec::new();
    if n == 2 {
        links.push((0, 1, LinkSpec::new(1.0, Medium::Wired)));
    } else if n > 2 {
        for i in 0..n {
            links.push((i, (i + 1) % n, LinkSpec::new(1.0, Medium::Wired)));
        }
    }
    Topology::from_links(labels, links).expect("ring is a valid topology")
}

/// Announce `prefixes_per_node` names under every node's prefix and install a
/// route to each of them on every other node.
pub fn benchmark_prefix_install(node_count: usize, prefixes_per_node: usize) -> BenchReport {
    let mut phases = Vec::with_capacity(3);

    let t = Instant::now();
    let topo = ring_topology(node_count);
    let mut forwarders: Vec<ForwarderState> = topo
        .nodes()
        .iter()
        .map(|node| {
            let mut fw =
                ForwarderState::new(node.clone(), Strategy::BestRoute, ForwarderConfig::default());
            for (k, (nb, link)) in topo.neighbors(node.index).enumerate() {
                fw.add_face(Face {
                    id: FaceId(k as u32 + 1),
                    remote: Some(nb),
                    kind: match link.medium {
                        Medium::Wired => crate::topo::FaceKind::Ethernet,
                        Medium::Wireless => crate::topo::FaceKind::Udp,
                    },
                });
            }
            fw
        })
        .collect();
    phases.push(PhaseTiming {
        phase: Phase::LinkConfig,
        seconds: t.elapsed().as_secs_f64(),
    });

    let t = Instant::now();
    let configs: Vec<NodeConfig> = compile_node_configs(&topo);
    phases.push(PhaseTiming {
        phase: Phase::Routing,
        seconds: t.elapsed().as_secs_f64(),
    });

    let t = Instant::now();
    let announced: Vec<Vec<Name>> = (0..node_count)
        .map(|i| {
            let base: Name = node_name_prefix(i).parse().expect("valid prefix");
            let app = base.child("app").expect("valid component");
            (0..prefixes_per_node)
                .map(|k| app.child(k.to_string()).expect("valid component"))
                .collect()
        })
        .collect();
    for (fw, cfg) in forwarders.iter_mut().zip(&configs) {
        for route in &cfg.ndn_routes {
            let Some(face) = fw.face_towards(route.next_hop.index) else {
                continue;
            };
            for name in &announced[route.dest_node.index] {
                fw.fib.add_next_hop(name, face, route.cost);
            }
        }
    }
    phases.push(PhaseTiming {
        phase: Phase::Install,
        seconds: t.elapsed().as_secs_f64(),
    });

    let table_sizes = forwarders
        .iter()
        .map(|fw| TableSize {
            node: fw.node.clone(),
            remote_entries: fw
                .fib
                .iter()
                .filter(|e| e.next_hops.iter().all(|h| h.face != FaceId::APP))
                .count(),
        })
        .collect();
    BenchReport {
        node_count,
        prefixes_per_node,
        phases,
        table_sizes,
    }
}
