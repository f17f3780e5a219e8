//! Node admission: DHCP parsing, the lease registry and provisioning plans.
//!
//! A node announces itself with a DHCP DISCOVER whose vendor class (option 60)
//! names its OS. The registry hands out the lowest free pool address and the
//! controller renders a declarative plan from the node's compiled config.

mod dhcp;
mod lease;
mod listener;
mod plan;

pub use dhcp::{
    parse_dhcp_message, DhcpError, DhcpMessage, DhcpOption, MessageType, FIXED_HEADER_LEN,
    MAGIC_COOKIE, OPTION_END, OPTION_MESSAGE_TYPE, OPTION_PAD, OPTION_VENDOR_CLASS,
};
pub use lease::{DEFAULT_POOL, LeaseError, LeaseRecord, LeaseRegistry, MacAddr, OsType};
pub use listener::{DhcpListener, SharedLeaseRegistry, DEFAULT_DHCP_PORT};
pub use plan::{emit_provisioning_plan, ProvisioningPlan, ProvisioningTask, MANUAL_REVIEW_TAG};
