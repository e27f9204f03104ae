//! Per-directed-link transmission failure probabilities and success-set
//! sampling.
//!
//! A transmission from node `l` to node `k` fails independently with
//! probability `p(k, l)`. Failures on the two directions of one physical
//! link are independent, as are failures across iterations. Self-information
//! never fails: `k` is always a member of its own success set.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::topology::Topology;

/// Failure probabilities for the directed links of a topology.
///
/// Entry `(dst, src)` is the probability that the transmission `src -> dst`
/// fails. Entries are zero off-link and on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    n: usize,
    p: Vec<f64>,
}

impl ErrorModel {
    /// Identical failure probability `p` on every directed link.
    pub fn uniform(topo: &Topology, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability { value: p });
        }
        let n = topo.node_count();
        let mut m = vec![0.0; n * n];
        for &(k, l) in topo.links() {
            m[k * n + l] = p;
            m[l * n + k] = p;
        }
        Ok(Self { n, p: m })
    }

    /// Per-link probabilities from `(src, dst, p)` triples (0-based ids).
    ///
    /// Unlisted directed links default to probability 0. Listing a pair that
    /// is not a link, a self-loop, or the same directed link twice is an
    /// error.
    pub fn from_links(topo: &Topology, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let n = topo.node_count();
        let mut m = vec![0.0; n * n];
        let mut seen = vec![false; n * n];
        for &(src, dst, p) in entries {
            if src >= n {
                return Err(Error::NodeIndex { index: src, n });
            }
            if dst >= n {
                return Err(Error::NodeIndex { index: dst, n });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability { value: p });
            }
            if !topo.is_link(src, dst) {
                return Err(Error::InvalidParameter(format!(
                    "({},{}) is not a link of the topology",
                    src + 1,
                    dst + 1
                )));
            }
            let idx = dst * n + src;
            if seen[idx] {
                return Err(Error::InvalidParameter(format!(
                    "directed link {} -> {} listed twice",
                    src + 1,
                    dst + 1
                )));
            }
            seen[idx] = true;
            m[idx] = p;
        }
        Ok(Self { n, p: m })
    }

    /// Read per-link probabilities from a CSV file with columns
    /// `src,dst,p` and 1-based node ids. A leading header line is optional.
    pub fn from_link_csv<P: AsRef<Path>>(topo: &Topology, path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 && line.eq_ignore_ascii_case("src,dst,p") {
                continue;
            }
            let parse = |fields: &[&str]| -> Option<(usize, usize, f64)> {
                let src: usize = fields[0].trim().parse().ok()?;
                let dst: usize = fields[1].trim().parse().ok()?;
                let p: f64 = fields[2].trim().parse().ok()?;
                if src == 0 || dst == 0 {
                    return None;
                }
                Some((src - 1, dst - 1, p))
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    detail: format!("expected `src,dst,p`, found {line:?}"),
                });
            }
            match parse(&fields) {
                Some(e) => entries.push(e),
                None => {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line: lineno + 1,
                        detail: format!("expected 1-based ids and a probability, found {line:?}"),
                    })
                }
            }
        }
        Self::from_links(topo, &entries)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Failure probability of the directed link `src -> dst`.
    pub fn prob(&self, dst: usize, src: usize) -> f64 {
        self.p[dst * self.n + src]
    }

    /// Average failure probability over the in-links of `dst` (0 if isolated).
    ///
    /// This is the per-node loss estimate handed to the enhanced relative
    /// degree rule when no external loss profile is available.
    pub fn mean_in_loss(&self, topo: &Topology, dst: usize) -> f64 {
        let nb = topo.open_neighbors(dst);
        if nb.is_empty() {
            return 0.0;
        }
        nb.iter().map(|&src| self.prob(dst, src)).sum::<f64>() / nb.len() as f64
    }
}

/// One realized set `S_k` per node: the members of `N_k` whose transmission
/// to `k` succeeded this iteration (always containing `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessSets {
    sets: Vec<Vec<usize>>,
}

impl SuccessSets {
    /// Blank container for [`sample_success_sets_into`].
    pub(crate) fn empty(n: usize) -> Self {
        Self {
            sets: vec![Vec::new(); n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.sets.len()
    }

    /// The realized success set of node `k`, sorted, containing `k`.
    pub fn set(&self, k: usize) -> &[usize] {
        &self.sets[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.sets.iter().map(Vec::as_slice)
    }
}

/// Sample one iteration of success sets.
///
/// Each in-link `l -> k` is dropped independently with probability
/// `model.prob(k, l)`. Draw order is fixed (nodes ascending, in-neighbors
/// ascending) so a seeded generator reproduces the sequence exactly.
pub fn sample_success_sets<R: Rng>(model: &ErrorModel, topo: &Topology, rng: &mut R) -> SuccessSets {
    let mut out = SuccessSets {
        sets: vec![Vec::new(); topo.node_count()],
    };
    sample_success_sets_into(model, topo, rng, &mut out);
    out
}

/// Allocation-free variant used by the simulation hot loop.
pub(crate) fn sample_success_sets_into<R: Rng>(
    model: &ErrorModel,
    topo: &Topology,
    rng: &mut R,
    out: &mut SuccessSets,
) {
    debug_assert_eq!(out.sets.len(), topo.node_count());
    for k in 0..topo.node_count() {
        let set = &mut out.sets[k];
        set.clear();
        for &l in topo.open_neighbors(k) {
            let fail = rng.random_bool(model.prob(k, l));
            if !fail {
                set.push(l);
            }
        }
        // insert self, keeping the set sorted
        match set.binary_search(&k) {
            Ok(_) => {}
            Err(pos) => set.insert(pos, k),
        }
    }
}
