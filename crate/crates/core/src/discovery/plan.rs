use std::net::SocketAddr;

use serde::{Deserialize, Serialize};

use super::{LeaseRecord, OsType};
use crate::logrepo::TESTBED_FACILITY;
use crate::topo::{FaceSpec, NodeConfig, NodeId, RouteEntry};

pub const MANUAL_REVIEW_TAG: &str = "manual-review";

/// One declarative provisioning step. Nothing here is executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum ProvisioningTask {
    InstallForwarder {
        os_type: OsType,
        packages: Vec<String>,
    },
    ConfigureFaces {
        faces: Vec<FaceSpec>,
    },
    InstallRoutes {
        ip_routes: Vec<RouteEntry>,
        ndn_routes: Vec<RouteEntry>,
        ndn_alternates: Vec<RouteEntry>,
    },
    SetLogSink {
        address: SocketAddr,
        facility: u8,
    },
}

impl ProvisioningTask {
    pub fn kind(&self) -> &'static str {
        match self {
            ProvisioningTask::InstallForwarder { .. } => "install-forwarder",
            ProvisioningTask::ConfigureFaces { .. } => "configure-faces",
            ProvisioningTask::InstallRoutes { .. } => "install-routes",
            ProvisioningTask::SetLogSink { .. } => "set-log-sink",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvisioningPlan {
    pub node: LeaseRecord,
    pub node_id: NodeId,
    pub tags: Vec<String>,
    pub tasks: Vec<ProvisioningTask>,
}

fn packages_for(os: OsType) -> Vec<String> {
    let pkgs: &[&str] = match os {
        OsType::Ubuntu | OsType::Pi => &["nfd", "ndn-tools", "bird2", "rsyslog"],
        OsType::Mac => &["nfd", "ndn-tools", "bird"],
        OsType::Unknown => &["nfd"],
    };
    pkgs.iter().map(|p| p.to_string()).collect()
}

/// Render the plan for one admitted node from its compiled configuration.
pub fn emit_provisioning_plan(
    lease: &LeaseRecord,
    config: &NodeConfig,
    log_sink: SocketAddr,
) -> ProvisioningPlan {
    let mut tags = Vec::new();
    if lease.os_type == OsType::Unknown {
        tags.push(MANUAL_REVIEW_TAG.to_string());
    }
    ProvisioningPlan {
        node: lease.clone(),
        node_id: config.node.clone(),
        tags,
        tasks: vec![
            ProvisioningTask::InstallForwarder {
                os_type: lease.os_type,
                packages: packages_for(lease.os_type),
            },
            ProvisioningTask::ConfigureFaces {
                faces: config.faces.clone(),
            },
            ProvisioningTask::InstallRoutes {
                ip_routes: config.ip_routes.clone(),
                ndn_routes: config.ndn_routes.clone(),
                ndn_alternates: config.ndn_alternates.clone(),
            },
            ProvisioningTask::SetLogSink {
                address: log_sink,
                facility: TESTBED_FACILITY,
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::MacAddr;
    use crate::topo::{canonical_diamond, compile_node_configs, parse_adjacency};
    use chrono::Utc;
    use std::net::Ipv4Addr;

    fn lease(os_type: OsType) -> LeaseRecord {
        LeaseRecord {
            mac: MacAddr([2, 0, 0, 0, 0, 1]),
            ip: Ipv4Addr::new(10, 0, 0, 11),
            vci: String::new(),
            os_type,
            issued_at: Utc::now(),
        }
    }

    fn sink() -> SocketAddr {
        "10.0.0.1:514".parse().unwrap()
    }

    fn kinds(plan: &ProvisioningPlan) -> Vec<&'static str> {
        plan.tasks.iter().map(|t| t.kind()).collect()
    }

    #[test]
    fn single_node_plan_has_all_tasks() {
        let topo = parse_adjacency("[[0]]").unwrap();
        let configs = compile_node_configs(&topo);
        let plan = emit_provisioning_plan(&lease(OsType::Ubuntu), &configs[0], sink());
        assert_eq!(
            kinds(&plan),
            ["install-forwarder", "configure-faces", "install-routes", "set-log-sink"]
        );
        match &plan.tasks[2] {
            ProvisioningTask::InstallRoutes { ip_routes, ndn_routes, .. } => {
                assert!(ip_routes.is_empty() && ndn_routes.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(plan.tags.is_empty());
    }

    #[test]
    fn diamond_r1_routes_are_embedded() {
        let configs = compile_node_configs(&canonical_diamond());
        let r1 = &configs[1];
        let plan = emit_provisioning_plan(&lease(OsType::Pi), r1, sink());
        match &plan.tasks[2] {
            ProvisioningTask::InstallRoutes { ndn_routes, .. } => {
                assert_eq!(ndn_routes.len(), 5);
                assert_eq!(ndn_routes, &r1.ndn_routes);
            }
            other => panic!("unexpected {other:?}"),
        }
        match &plan.tasks[1] {
            ProvisioningTask::ConfigureFaces { faces } => assert_eq!(faces, &r1.faces),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(plan.node_id.label, "R1");
    }

    #[test]
    fn unknown_os_is_tagged_for_review() {
        let configs = compile_node_configs(&canonical_diamond());
        let plan = emit_provisioning_plan(&lease(OsType::Unknown), &configs[0], sink());
        assert_eq!(plan.tags, [MANUAL_REVIEW_TAG]);
        assert_eq!(plan.tasks.len(), 4);
    }

    #[test]
    fn plan_serializes_with_task_tags() {
        let configs = compile_node_configs(&canonical_diamond());
        let plan = emit_provisioning_plan(&lease(OsType::Mac), &configs[0], sink());
        let json = serde_json::to_value(&plan).unwrap();
        assert_eq!(json["tasks"][3]["task"], "set-log-sink");
        assert_eq!(json["tasks"][3]["address"], "10.0.0.1:514");
    }
}
