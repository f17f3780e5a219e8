use serde::{Deserialize, Serialize};

use crate::SimTime;

pub const INITIAL_RTO: SimTime = SimTime(1_000_000);
pub const MIN_RTO: SimTime = SimTime(200_000);
pub const MAX_RTO: SimTime = SimTime(4_000_000);

/// Consumer congestion window and retransmission timer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AimdState {
    pub window: f64,
    pub in_flight: u32,
    pub rto: SimTime,
    /// Smoothed RTT in ms; `None` before the first sample.
    pub srtt: Option<f64>,
    pub rttvar: f64,
    pub next_seq: u64,
}

impl Default for AimdState {
    fn default() -> Self {
        AimdState {
            window: 1.0,
            in_flight: 0,
            rto: INITIAL_RTO,
            srtt: None,
            rttvar: 0.0,
            next_seq: 0,
        }
    }
}

impl AimdState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Room for one more interest under the current window.
    pub fn can_send(&self) -> bool {
        (self.in_flight as f64) < self.window
    }

    pub fn on_send(&mut self) {
        self.in_flight += 1;
    }

    /// Data arrived. `rtt_ms` is `None` for retransmitted interests (Karn).
    pub fn on_data(&mut self, rtt_ms: Option<f64>) {
        self.in_flight = self.in_flight.saturating_sub(1);
        self.window += 1.0 / self.window;
        if let Some(sample) = rtt_ms {
            self.observe_rtt(sample);
        }
    }

    pub fn on_timeout(&mut self) {
        self.in_flight = self.in_flight.saturating_sub(1);
        self.window = (self.window / 2.0).max(1.0);
    }

    fn observe_rtt(&mut self, sample: f64) {
        match self.srtt {
            None => {
                self.srtt = Some(sample);
                self.rttvar = sample / 2.0;
            }
            Some(srtt) => {
                self.rttvar = 0.75 * self.rttvar + 0.25 * (srtt - sample).abs();
                self.srtt = Some(0.875 * srtt + 0.125 * sample);
            }
        }
        let rto = SimTime::from_millis_f64(self.srtt.unwrap_or(sample) + 4.0 * self.rttvar);
        self.rto = rto.clamp(MIN_RTO, MAX_RTO);
    }
}

pub fn consumer_on_data(mut aimd: AimdState, rtt_sample_ms: Option<f64>) -> AimdState {
    aimd.on_data(rtt_sample_ms);
    aimd
}

pub fn consumer_on_timeout(mut aimd: AimdState) -> AimdState {
    aimd.on_timeout();
    aimd
}

/// Interests per second that carry `demand_mbps` of payload.
pub fn demand_to_interest_rate(demand_mbps: f64, payload_size: u32) -> f64 {
    demand_mbps * 1e6 / (8.0 * payload_size as f64)
}

/// Minimum spacing between interests, rounded up so the cap is never exceeded.
pub fn send_interval(demand_mbps: f64, payload_size: u32) -> SimTime {
    let us = 1e6 / demand_to_interest_rate(demand_mbps, payload_size);
    SimTime((us - 1e-6).ceil().max(1.0) as u64)
}
