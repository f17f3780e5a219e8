use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FaceId, FibEntry};

/// Forwarding strategy choosing which FIB next hops receive an interest.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The single cheapest next hop.
    #[default]
    BestRoute,
    /// Every next hop except the incoming face.
    Multicast,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown forwarding strategy {0:?}")]
pub struct UnknownStrategy(pub String);

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "best_route" => Ok(Strategy::BestRoute),
            "multicast" => Ok(Strategy::Multicast),
            other => Err(UnknownStrategy(other.to_string())),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::BestRoute => "best_route",
            Strategy::Multicast => "multicast",
        })
    }
}

/// Faces an interest arriving on `in_face` is forwarded to.
///
/// An empty result means the interest dies here.
pub fn strategy_select(strategy: Strategy, entry: &FibEntry, in_face: FaceId) -> Vec<FaceId> {
    let eligible = entry.next_hops.iter().filter(|h| h.face != in_face);
    match strategy {
        Strategy::BestRoute => eligible
            .min_by(|a, b| a.cost.total_cmp(&b.cost).then(a.face.cmp(&b.face)))
            .map(|h| vec![h.face])
            .unwrap_or_default(),
        Strategy::Multicast => {
            let mut faces: Vec<FaceId> = eligible.map(|h| h.face).collect();
            faces.sort();
            faces
        }
    }
}
