//! Global (controller-side) route compilation.
//!
//! Every node gets one static route per other reachable node, computed with
//! Dijkstra over link delays. Among equal-cost paths the lexicographically
//! smallest index sequence wins, which also means the smallest first-hop index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::{Medium, NodeId, TopoError, Topology};

/// First address handed to testbed nodes; node `i` owns `BASE + i`.
const NODE_ADDRESS_BASE: u32 = u32::from_be_bytes([10, 0, 0, 10]);

/// What a link costs when computing shortest paths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeight {
    #[default]
    Delay,
    HopCount,
}

impl EdgeWeight {
    fn of(self, delay_ms: f64) -> f64 {
        match self {
            EdgeWeight::Delay => delay_ms,
            EdgeWeight::HopCount => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteEntry {
    /// `a.b.c.d/32` for IP routes, `/testbed/P<i>` for NDN routes.
    pub destination: String,
    pub dest_node: NodeId,
    pub next_hop: NodeId,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceKind {
    Ethernet,
    Tcp,
    Udp,
    Websocket,
    App,
}

/// A point-to-point face towards a neighbor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceSpec {
    pub face_id: u32,
    pub neighbor: NodeId,
    pub kind: FaceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub node: NodeId,
    pub address: Ipv4Addr,
    pub name_prefix: String,
    pub faces: Vec<FaceSpec>,
    pub ip_routes: Vec<RouteEntry>,
    pub ndn_routes: Vec<RouteEntry>,
    /// Loop-free secondary NDN next hops, used by multipath strategies.
    pub ndn_alternates: Vec<RouteEntry>,
}

/// All loop-free next hops from one node towards one destination.
#[derive(Debug, Clone, PartialEq)]
pub struct NextHopSet {
    pub dest: usize,
    /// `(neighbor, cost)` sorted by cost, then neighbor index.
    pub hops: Vec<(usize, f64)>,
}

pub fn node_address(index: usize) -> Ipv4Addr {
    Ipv4Addr::from(NODE_ADDRESS_BASE + index as u32)
}

pub fn node_name_prefix(index: usize) -> String {
    format!("/testbed/P{index}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist: f64,
    node: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over up links, optionally pretending `excluded` does not exist.
fn dijkstra(
    topo: &Topology,
    source: usize,
    weight: EdgeWeight,
    excluded: Option<usize>,
) -> Vec<Option<f64>> {
    let n = topo.node_count();
    let mut dist: Vec<Option<f64>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = Some(0.0);
    heap.push(Candidate {
        dist: 0.0,
        node: source,
    });
    while let Some(Candidate { dist: d, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for (v, link) in topo.neighbors(u) {
            if !link.up || Some(v) == excluded || done[v] {
                continue;
            }
            let alt = d + weight.of(link.delay_ms);
            if dist[v].map_or(true, |cur| alt < cur) {
                dist[v] = Some(alt);
                heap.push(Candidate { dist: alt, node: v });
            }
        }
    }
    dist
}

/// Shortest-path distances from `source` over up links, by link delay.
pub fn shortest_distances(topo: &Topology, source: usize) -> Vec<Option<f64>> {
    dijkstra(topo, source, EdgeWeight::Delay, None)
}

/// Lexicographically smallest shortest path to every reachable node.
fn lexicographic_paths(
    topo: &Topology,
    source: usize,
    dist: &[Option<f64>],
    weight: EdgeWeight,
) -> Vec<Option<Vec<usize>>> {
    let n = topo.node_count();
    let mut order: Vec<usize> = (0..n).filter(|&v| dist[v].is_some()).collect();
    order.sort_by(|&a, &b| dist[a].unwrap().total_cmp(&dist[b].unwrap()).then(a.cmp(&b)));

    let mut paths: Vec<Option<Vec<usize>>> = vec![None; n];
    paths[source] = Some(vec![source]);
    for v in order.into_iter().filter(|&v| v != source) {
        let dv = dist[v].unwrap();
        // Weights are positive, so every tight predecessor is settled before v.
        let best = topo
            .neighbors(v)
            .filter(|(u, link)| {
                link.up && dist[*u].is_some_and(|du| du + weight.of(link.delay_ms) == dv)
            })
            .filter_map(|(u, _)| paths[u].as_ref())
            .map(|p| {
                let mut p = p.clone();
                p.push(v);
                p
            })
            .min();
        paths[v] = best;
    }
    paths
}

/// Routes from `source` to every other reachable node, weighted by link delay.
pub fn compute_routes(topo: &Topology, source: &NodeId) -> Result<Vec<RouteEntry>, TopoError> {
    compute_routes_with(topo, source, EdgeWeight::Delay)
}

pub fn compute_routes_with(
    topo: &Topology,
    source: &NodeId,
    weight: EdgeWeight,
) -> Result<Vec<RouteEntry>, TopoError> {
    let src = resolve(topo, source)?;
    let dist = dijkstra(topo, src, weight, None);
    let paths = lexicographic_paths(topo, src, &dist, weight);
    let nodes = topo.nodes();
    Ok((0..topo.node_count())
        .filter(|&d| d != src)
        .filter_map(|d| {
            let path = paths[d].as_ref()?;
            Some(RouteEntry {
                destination: format!("{}/32", node_address(d)),
                dest_node: nodes[d].clone(),
                next_hop: nodes[path[1]].clone(),
                cost: dist[d]?,
            })
        })
        .collect())
}

fn resolve(topo: &Topology, node: &NodeId) -> Result<usize, TopoError> {
    match topo.node(node.index) {
        Some(n) if n == node => Ok(node.index),
        _ => Err(TopoError::UnknownNode(node.label.clone())),
    }
}

/// Every neighbor that can reach each destination without coming back through
/// `source`, with cost `delay(source, neighbor) + distance(neighbor, dest)`.
///
/// The cheapest entry of each set is the neighbor chosen by [`compute_routes`]
/// up to equal-cost ties.
pub fn compute_next_hop_sets(topo: &Topology, source: usize) -> Vec<NextHopSet> {
    let n = topo.node_count();
    let per_neighbor: Vec<(usize, f64, Vec<Option<f64>>)> = topo
        .neighbors(source)
        .filter(|(_, link)| link.up)
        .map(|(nb, link)| (nb, link.delay_ms, dijkstra(topo, nb, EdgeWeight::Delay, Some(source))))
        .collect();
    (0..n)
        .filter(|&d| d != source)
        .filter_map(|dest| {
            let mut hops: Vec<(usize, f64)> = per_neighbor
                .iter()
                .filter_map(|(nb, delay, dist)| dist[dest].map(|d| (*nb, delay + d)))
                .collect();
            if hops.is_empty() {
                return None;
            }
            hops.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            Some(NextHopSet { dest, hops })
        })
        .collect()
}

/// Faces, IP routes and NDN routes for every node.
pub fn compile_node_configs(topo: &Topology) -> Vec<NodeConfig> {
    let nodes = topo.nodes();
    nodes
        .iter()
        .map(|node| {
            let faces = topo
                .neighbors(node.index)
                .enumerate()
                .map(|(k, (nb, link))| FaceSpec {
                    face_id: k as u32 + 1,
                    neighbor: nodes[nb].clone(),
                    kind: match link.medium {
                        Medium::Wired => FaceKind::Ethernet,
                        Medium::Wireless => FaceKind::Udp,
                    },
                })
                .collect();
            let ip_routes = compute_routes(topo, node).expect("node belongs to topology");
            let ndn_routes: Vec<RouteEntry> = ip_routes
                .iter()
                .map(|r| RouteEntry {
                    destination: node_name_prefix(r.dest_node.index),
                    ..r.clone()
                })
                .collect();
            let ndn_alternates = compute_next_hop_sets(topo, node.index)
                .into_iter()
                .flat_map(|set| {
                    let primary = ndn_routes
                        .iter()
                        .find(|r| r.dest_node.index == set.dest)
                        .map(|r| r.next_hop.index);
                    set.hops
                        .into_iter()
                        .filter(move |(nb, _)| Some(*nb) != primary)
                        .map(move |(nb, cost)| RouteEntry {
                            destination: node_name_prefix(set.dest),
                            dest_node: nodes[set.dest].clone(),
                            next_hop: nodes[nb].clone(),
                            cost,
                        })
                })
                .collect();
            NodeConfig {
                node: node.clone(),
                address: node_address(node.index),
                name_prefix: node_name_prefix(node.index),
                faces,
                ip_routes,
                ndn_routes,
                ndn_alternates,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topo::{canonical_diamond, parse_adjacency, LinkSpec, Medium};

    fn line(delay: f64) -> Topology {
        Topology::from_links(
            vec!["A".into(), "B".into()],
            [(0, 1, LinkSpec::new(delay, Medium::Wired))],
        )
        .unwrap()
    }

    #[test]
    fn single_edge_route() {
        let topo = line(3.0);
        let routes = compute_routes(&topo, &topo.nodes()[0]).unwrap();
        assert_eq!(routes.len(), 1);
        assert_eq!(routes[0].next_hop.label, "B");
        assert_eq!(routes[0].cost, 3.0);
        assert_eq!(routes[0].destination, "10.0.0.11/32");
    }

    // Diamond used throughout is a reconstruction of the failure-experiment figure.
    #[test]
    fn diamond_routes_cross_r3_r4() {
        let topo = canonical_diamond();
        let c0 = topo.find("C0").unwrap();
        let routes = compute_routes(&topo, c0).unwrap();
        let to_p1 = routes.iter().find(|r| r.dest_node.label == "P1").unwrap();
        assert_eq!(to_p1.cost, 12.0);
        assert_eq!(to_p1.next_hop.label, "R1");

        let r1 = topo.find("R1").unwrap();
        let routes = compute_routes(&topo, r1).unwrap();
        let to_p1 = routes.iter().find(|r| r.dest_node.label == "P1").unwrap();
        assert_eq!(to_p1.next_hop.label, "R3");
        assert_eq!(to_p1.cost, 11.0);
    }

    #[test]
    fn ties_prefer_smallest_neighbor_index() {
        // Square 0-1-3, 0-2-3 with equal delays: 0 reaches 3 via 1.
        let topo = parse_adjacency(
            "[[null,1,1,null],[1,null,null,1],[1,null,null,1],[null,1,1,null]]",
        )
        .unwrap();
        let routes = compute_routes(&topo, &topo.nodes()[0]).unwrap();
        assert_eq!(routes[2].dest_node.index, 3);
        assert_eq!(routes[2].next_hop.index, 1);
        let routes = compute_routes(&topo, &topo.nodes()[3]).unwrap();
        assert_eq!(routes[0].next_hop.index, 1);
    }

    #[test]
    fn ties_between_branches_pick_smaller_index() {
        // Two equal branches 1-2-4 and 1-3-4 (links listed out of order).
        let topo = Topology::from_links(
            (0..5).map(|i| format!("N{i}")).collect(),
            [(0, 1), (1, 3), (1, 2), (3, 4), (2, 4)]
                .map(|(a, b)| (a, b, LinkSpec::new(1.0, Medium::Wired))),
        )
        .unwrap();
        let routes = compute_routes(&topo, &topo.nodes()[1]).unwrap();
        let to4 = routes.iter().find(|r| r.dest_node.index == 4).unwrap();
        assert_eq!(to4.next_hop.index, 2);
    }

    #[test]
    fn down_links_are_avoided() {
        let mut topo = canonical_diamond();
        topo.set_link_state(3, 4, false).unwrap();
        let routes = compute_routes(&topo, &topo.nodes()[0].clone()).unwrap();
        let to_p1 = routes.iter().find(|r| r.dest_node.label == "P1").unwrap();
        assert_eq!(to_p1.cost, 42.0);
        let r1_routes = compute_routes(&topo, &topo.nodes()[1].clone()).unwrap();
        assert_eq!(
            r1_routes.iter().find(|r| r.dest_node.label == "P1").unwrap().next_hop.label,
            "R2"
        );
    }

    #[test]
    fn hop_count_weight() {
        let topo = canonical_diamond();
        let routes = compute_routes_with(&topo, &topo.nodes()[0], EdgeWeight::HopCount).unwrap();
        let to_p1 = routes.iter().find(|r| r.dest_node.label == "P1").unwrap();
        assert_eq!(to_p1.cost, 4.0);
    }

    #[test]
    fn unknown_source() {
        let topo = line(1.0);
        let ghost = NodeId {
            index: 7,
            label: "Z".into(),
        };
        assert_eq!(
            compute_routes(&topo, &ghost).unwrap_err(),
            TopoError::UnknownNode("Z".into())
        );
    }

    #[test]
    fn unreachable_nodes_get_no_route() {
        let topo = parse_adjacency("[[null, 1, null], [1, null, null], [null, null, null]]")
            .unwrap();
        let routes = compute_routes(&topo, &topo.nodes()[0]).unwrap();
        assert_eq!(routes.len(), 1);
    }

    #[test]
    fn single_node_config() {
        let topo = parse_adjacency("[[null]]").unwrap();
        let configs = compile_node_configs(&topo);
        assert_eq!(configs.len(), 1);
        assert!(configs[0].ip_routes.is_empty());
        assert!(configs[0].ndn_routes.is_empty());
        assert_eq!(configs[0].name_prefix, "/testbed/P0");
    }

    #[test]
    fn diamond_ndn_route_for_producer_prefix() {
        let configs = compile_node_configs(&canonical_diamond());
        let c0 = &configs[0];
        let route = c0
            .ndn_routes
            .iter()
            .find(|r| r.destination == "/testbed/P5")
            .unwrap();
        assert_eq!(route.next_hop.label, "R1");
        assert_eq!(configs[1].ndn_routes.len(), 5);
    }

    #[test]
    fn diamond_alternates_offer_the_slow_path() {
        let configs = compile_node_configs(&canonical_diamond());
        let r1 = &configs[1];
        let alt: Vec<_> = r1
            .ndn_alternates
            .iter()
            .filter(|r| r.destination == "/testbed/P5")
            .collect();
        assert_eq!(alt.len(), 1);
        assert_eq!(alt[0].next_hop.label, "R2");
        assert_eq!(alt[0].cost, 41.0);
        // R3 has no way to P1 except R4 or back through R1 via R2.
        let r3 = &configs[3];
        let alt: Vec<_> = r3
            .ndn_alternates
            .iter()
            .filter(|r| r.destination == "/testbed/P5")
            .map(|r| (r.next_hop.label.as_str(), r.cost))
            .collect();
        assert_eq!(alt, vec![("R1", 46.0)]);
        // C0 only has R1.
        assert!(configs[0].ndn_alternates.is_empty());
    }

    #[test]
    fn ring_configs() {
        let n = 10;
        let topo = Topology::from_links(
            (0..n).map(|i| format!("N{i}")).collect(),
            (0..n).map(|i| (i, (i + 1) % n, LinkSpec::new(1.0, Medium::Wired))),
        )
        .unwrap();
        for cfg in compile_node_configs(&topo) {
            assert_eq!(cfg.ip_routes.len(), 9);
            assert_eq!(cfg.ndn_routes.len(), 9);
            assert_eq!(cfg.faces.len(), 2);
            assert_eq!(cfg.faces[0].face_id, 1);
        }
    }

    #[test]
    fn wireless_links_get_udp_faces() {
        let topo = Topology::from_links(
            vec!["A".into(), "B".into()],
            [(0, 1, LinkSpec::new(2.0, Medium::Wireless))],
        )
        .unwrap();
        let cfg = compile_node_configs(&topo);
        assert_eq!(cfg[0].faces[0].kind, FaceKind::Udp);
    }
}
