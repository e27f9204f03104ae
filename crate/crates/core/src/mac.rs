//! MAC-level transmission errors: saturation fixed point of the binary
//! exponential backoff and a slotted discrete-event validator.
//!
//! Per-slot transmission probability in saturation, written with the
//! removable singularity at `q = 1/2` algebraically cancelled:
//!
//! ```text
//! tau(q) = 2 / (CW + 1 + q CW sum_{i=0}^{R-1} (2q)^i)
//! ```
//!
//! A transmission to destination `k` collides when any of the other members
//! of `k`'s closed neighborhood transmits in the same slot, so with `c`
//! potential contenders the collision probability satisfies
//! `q = 1 - (1 - tau(q))^c`. The composed map is monotone, giving a unique
//! root found by bisection. A packet is discarded after `R` retransmissions,
//! hence the loss probability `p = q^(R+1)`.
//!
//! The discrete-event model is slotted and saturated: every node always has
//! a packet for a round-robin neighbor destination, holds a backoff counter
//! uniform over the current window, decrements it each slot and transmits at
//! zero. On a collision the window doubles up to `CW_max = 2^R CW`; it
//! resets to `CW` only on a success, staying at its current size across
//! packet discards. That reset rule makes the stationary attempt process of
//! the simulator coincide with the Markov chain behind `tau(q)` (whose
//! maximum backoff stage is sticky until a success), which is what the
//! model-versus-simulation comparison relies on.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::failures::ErrorModel;
use crate::topology::Topology;

/// Backoff parameters: initial contention window and retransmission limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacParams {
    pub cw: u32,
    pub r: u32,
}

impl MacParams {
    pub fn new(cw: u32, r: u32) -> Result<Self> {
        if cw < 1 {
            return Err(Error::InvalidParameter(format!(
                "contention window CW = {cw} must be >= 1"
            )));
        }
        if r > 20 {
            return Err(Error::InvalidParameter(format!(
                "retransmission limit R = {r} too large (max 20)"
            )));
        }
        Ok(Self { cw, r })
    }

    /// Maximum window `2^R CW`.
    pub fn cw_max(&self) -> u32 {
        self.cw << self.r
    }
}

/// Saturation fixed-point output for one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacNodeResult {
    /// Per-slot transmission probability.
    pub tau: f64,
    /// Per-attempt collision probability.
    pub q: f64,
    /// Packet loss probability `q^(R+1)`.
    pub p: f64,
}

/// `tau(q)` in the cancelled form (defined for all `q` in `[0, 1]`).
pub fn transmission_probability(params: &MacParams, q: f64) -> f64 {
    let mut geo = 0.0;
    let mut term = 1.0;
    for _ in 0..params.r {
        geo += term;
        term *= 2.0 * q;
    }
    2.0 / (params.cw as f64 + 1.0 + q * params.cw as f64 * geo)
}

/// Solve `q = 1 - (1 - tau(q))^contenders` by bisection.
///
/// `contenders` is the number of stations whose simultaneous transmission
/// destroys a reception (the destination's closed neighborhood minus the
/// sender). Zero contenders pin `q = 0` and `tau = 2/(CW+1)`.
pub fn bianchi_fixed_point(params: &MacParams, contenders: usize) -> MacNodeResult {
    if contenders == 0 {
        return MacNodeResult {
            tau: transmission_probability(params, 0.0),
            q: 0.0,
            p: 0.0,
        };
    }
    let g = |q: f64| q - (1.0 - (1.0 - transmission_probability(params, q)).powi(contenders as i32));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    debug_assert!(g(lo) <= 0.0 && g(hi) >= 0.0);
    for _ in 0..200 {
        if hi - lo <= 1e-15 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    MacNodeResult {
        tau: transmission_probability(params, q),
        q,
        p: q.powi(params.r as i32 + 1),
    }
}

/// Per-node fixed-point results for a whole topology.
///
/// Receptions at node `k` contend with the `n_k - 1` other members of its
/// closed neighborhood.
pub fn mac_node_results(topo: &Topology, params: &MacParams) -> Vec<MacNodeResult> {
    (0..topo.node_count())
        .map(|k| bianchi_fixed_point(params, topo.closed_degree(k) - 1))
        .collect()
}

/// Error model with `p(k, l) = q_k^(R+1)` on every in-link of `k`:
/// transmission errors toward a destination are identical across its
/// incoming links.
pub fn mac_error_model(topo: &Topology, params: &MacParams) -> Result<ErrorModel> {
    let results = mac_node_results(topo, params);
    let mut entries = Vec::new();
    for k in 0..topo.node_count() {
        for &l in topo.open_neighbors(k) {
            entries.push((l, k, results[k].p));
        }
    }
    ErrorModel::from_links(topo, &entries)
}

/// Empirical output of the slotted backoff simulation, indexed by
/// destination node.
#[derive(Debug, Clone, PartialEq)]
pub struct MacSimResult {
    /// Per-attempt collision rate toward each destination.
    pub q_hat: Vec<f64>,
    /// Packet discard rate toward each destination.
    pub p_hat: Vec<f64>,
    pub attempts: Vec<u64>,
    pub collisions: Vec<u64>,
    pub packets: Vec<u64>,
    pub discards: Vec<u64>,
}

/// Slotted saturated backoff simulator.
pub struct BackoffSim<'a> {
    topo: &'a Topology,
    params: MacParams,
    rng: ChaCha12Rng,
    active: Vec<bool>,
    window: Vec<u32>,
    counter: Vec<u32>,
    /// Failed attempts of the node's current packet.
    failed: Vec<u32>,
    dest_pos: Vec<usize>,
}

impl<'a> BackoffSim<'a> {
    pub fn new(topo: &'a Topology, params: MacParams, seed: u64) -> Self {
        let n = topo.node_count();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let active: Vec<bool> = (0..n).map(|k| !topo.open_neighbors(k).is_empty()).collect();
        let window = vec![params.cw; n];
        let mut counter = vec![0u32; n];
        for k in 0..n {
            if active[k] {
                counter[k] = rng.random_range(0..params.cw);
            }
        }
        Self {
            topo,
            params,
            rng,
            active,
            window,
            counter,
            failed: vec![0; n],
            dest_pos: vec![0; n],
        }
    }

    /// Exclude a node from transmitting (it still receives and interferes
    /// only through silence, i.e. not at all).
    pub fn set_active(&mut self, node: usize, active: bool) {
        self.active[node] = active;
    }

    pub fn run(&mut self, slots: u64) -> MacSimResult {
        let n = self.topo.node_count();
        let mut attempts = vec![0u64; n];
        let mut collisions = vec![0u64; n];
        let mut packets = vec![0u64; n];
        let mut discards = vec![0u64; n];
        let mut transmitting = vec![false; n];
        let mut txs: Vec<usize> = Vec::with_capacity(n);

        for _ in 0..slots {
            txs.clear();
            for k in 0..n {
                transmitting[k] = self.active[k] && self.counter[k] == 0;
                if transmitting[k] {
                    txs.push(k);
                }
            }
            for &l in &txs {
                let dest = self.topo.open_neighbors(l)[self.dest_pos[l]];
                attempts[dest] += 1;
                let collided = self
                    .topo
                    .neighborhood(dest)
                    .expect("valid node")
                    .iter()
                    .any(|&j| j != l && transmitting[j]);
                if collided {
                    collisions[dest] += 1;
                    self.window[l] = (self.window[l] * 2).min(self.params.cw_max());
                    if self.failed[l] == self.params.r {
                        // out of retransmissions: drop the packet, move on
                        discards[dest] += 1;
                        packets[dest] += 1;
                        self.failed[l] = 0;
                        self.advance_dest(l);
                    } else {
                        self.failed[l] += 1;
                    }
                } else {
                    packets[dest] += 1;
                    self.failed[l] = 0;
                    self.window[l] = self.params.cw;
                    self.advance_dest(l);
                }
                self.counter[l] = self.rng.random_range(0..self.window[l]);
            }
            for k in 0..n {
                if self.active[k] && !transmitting[k] {
                    self.counter[k] -= 1;
                }
            }
        }

        let ratio = |num: &[u64], den: &[u64]| {
            num.iter()
                .zip(den)
                .map(|(&a, &b)| if b == 0 { 0.0 } else { a as f64 / b as f64 })
                .collect::<Vec<f64>>()
        };
        MacSimResult {
            q_hat: ratio(&collisions, &attempts),
            p_hat: ratio(&discards, &packets),
            attempts,
            collisions,
            packets,
            discards,
        }
    }

    fn advance_dest(&mut self, l: usize) {
        self.dest_pos[l] = (self.dest_pos[l] + 1) % self.topo.open_neighbors(l).len();
    }
}

/// Run the slotted backoff simulation for `slots` slots.
pub fn simulate_backoff(topo: &Topology, params: MacParams, slots: u64, seed: u64) -> MacSimResult {
    BackoffSim::new(topo, params, seed).run(slots)
}
