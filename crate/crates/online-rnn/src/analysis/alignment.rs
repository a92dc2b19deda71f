//! Gradient alignment: every learner runs passively on the trajectory of one
//! driving learner, and all pairs of their `W` gradients are compared by
//! cosine similarity.

use std::collections::{BTreeMap, VecDeque};

use online_rnn_core::learner::Learner;
use online_rnn_core::linalg::{dot, Matrix};
use online_rnn_core::rnn;
use online_rnn_core::Error as CoreError;
use serde::Serialize;

use crate::config::{Algorithm, RunConfig};
use crate::error::{HarnessError, Result};
use crate::train::{build_learner, Simulation};

pub const HISTOGRAM_BINS: usize = 100;

/// `⟨gx, gy⟩ / (‖gx‖ ‖gy‖)`, or `None` if either gradient is zero.
pub fn cosine(gx: &Matrix, gy: &Matrix) -> Option<f64> {
    assert_eq!(gx.shape(), gy.shape(), "gradient shapes differ");
    let (nx, ny) = (gx.frobenius_norm(), gy.frobenius_norm());
    if nx == 0.0 || ny == 0.0 {
        return None;
    }
    Some((dot(gx.as_slice(), gy.as_slice()) / (nx * ny)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlignmentRecord {
    /// Step of the parameter application both gradients refer to.
    pub step: usize,
    pub x: Algorithm,
    pub y: Algorithm,
    pub cosine: f64,
    pub norm_x: f64,
    pub norm_y: f64,
}

impl AlignmentRecord {
    pub fn pair_label(&self) -> String {
        pair_label(self.x, self.y)
    }
}

pub fn pair_label(x: Algorithm, y: Algorithm) -> String {
    format!("{x}:{y}")
}

/// Running statistics of one pair's alignments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub x: Algorithm,
    pub y: Algorithm,
    pub count: usize,
    /// Steps skipped because one of the gradients was zero.
    pub excluded: usize,
    pub sum: f64,
    /// Counts over `HISTOGRAM_BINS` uniform bins on `[-1, 1]`.
    pub histogram: Vec<u64>,
}

impl PairSummary {
    fn new(x: Algorithm, y: Algorithm) -> Self {
        PairSummary {
            x,
            y,
            count: 0,
            excluded: 0,
            sum: 0.0,
            histogram: vec![0; HISTOGRAM_BINS],
        }
    }

    fn record(&mut self, cosine: f64) {
        self.count += 1;
        self.sum += cosine;
        self.histogram[histogram_bin(cosine)] += 1;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

pub fn histogram_bin(cosine: f64) -> usize {
    let scaled = ((cosine + 1.0) / 2.0 * HISTOGRAM_BINS as f64).floor();
    (scaled.max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

#[derive(Debug, Clone, Serialize)]
pub struct AlignmentReport {
    pub driver: Algorithm,
    pub learners: Vec<Algorithm>,
    pub steps: usize,
    pub pairs: Vec<PairSummary>,
}

impl AlignmentReport {
    /// Summary for the unordered pair `{x, y}`.
    pub fn pair(&self, x: Algorithm, y: Algorithm) -> Option<&PairSummary> {
        self.pairs
            .iter()
            .find(|p| (p.x == x && p.y == y) || (p.x == y && p.y == x))
    }

    pub fn mean(&self, x: Algorithm, y: Algorithm) -> Option<f64> {
        if x == y {
            return Some(1.0);
        }
        self.pair(x, y).and_then(PairSummary::mean)
    }

    /// Pair label to mean alignment and exclusion count.
    pub fn means(&self) -> BTreeMap<String, PairMean> {
        self.pairs
            .iter()
            .map(|p| {
                (
                    pair_label(p.x, p.y),
                    PairMean {
                        mean: p.mean(),
                        count: p.count,
                        excluded: p.excluded,
                    },
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairMean {
    pub mean: Option<f64>,
    pub count: usize,
    pub excluded: usize,
}

/// Runs `run.steps` steps training `W` with `run.algorithm` while every
/// learner in `learners` computes its gradient passively. Gradients are
/// paired by the step of the parameter application they refer to, so a
/// learner with delay `d` is compared `d` steps after emitting. Each record
/// is passed to `sink` as soon as it is available.
pub fn alignment_sweep(
    run: &RunConfig,
    learners: &[Algorithm],
    mut sink: impl FnMut(&AlignmentRecord),
) -> Result<AlignmentReport> {
    let driver = run.algorithm;
    let mut lineup: Vec<Algorithm> = Vec::new();
    for &alg in learners {
        if !lineup.contains(&alg) {
            lineup.push(alg);
        }
    }
    if !lineup.contains(&driver) {
        lineup.insert(0, driver);
    }
    if lineup.contains(&Algorithm::EBptt) || lineup.contains(&Algorithm::FixedW) {
        return Err(HarnessError::Config(
            "alignment needs one gradient per parameter application; e-bptt and fixed-w emit none".into(),
        ));
    }

    let mut sim = Simulation::new(run)?;
    let mut agents: Vec<Box<dyn Learner>> = lineup
        .iter()
        .map(|&alg| build_learner(run, &sim.cfg, &sim.params, alg))
        .collect::<Result<_>>()?;
    let driver_index = lineup.iter().position(|&a| a == driver).expect("driver is in the lineup");
    let max_delay = agents.iter().map(|a| a.delay()).max().unwrap_or(0);
    let mut pending: Vec<VecDeque<(usize, Matrix)>> = vec![VecDeque::new(); agents.len()];
    let mut pairs: Vec<PairSummary> = Vec::new();
    for i in 0..lineup.len() {
        for j in i + 1..lineup.len() {
            pairs.push(PairSummary::new(lineup[i], lineup[j]));
        }
    }

    for t in 0..run.steps {
        let data = match sim.advance() {
            Ok(d) => d,
            Err(CoreError::NonFinite(_)) => return Err(sim.diverged(f64::NAN, agents[driver_index].as_ref())),
            Err(e) => return Err(e.into()),
        };
        let mut driver_grad = None;
        {
            let ctx = data.context(&sim.cfg, &sim.params);
            for (k, agent) in agents.iter_mut().enumerate() {
                if let Some(g) = agent.update(&ctx)? {
                    let applied_at = t - agent.delay();
                    if k == driver_index {
                        driver_grad = Some(g.clone());
                    }
                    pending[k].push_back((applied_at, g));
                }
            }
        }
        sim.train_readout(&data, run.lr_out())
            .map_err(|_| sim.diverged(data.loss, agents[driver_index].as_ref()))?;
        if let Some(g) = driver_grad {
            rnn::sgd_w(&mut sim.params, &g, run.lr).map_err(|_| sim.diverged(data.loss, agents[driver_index].as_ref()))?;
        }

        let Some(s) = t.checked_sub(max_delay) else {
            continue;
        };
        let grads: Vec<Option<Matrix>> = pending
            .iter_mut()
            .map(|q| {
                while q.front().is_some_and(|(step, _)| *step < s) {
                    q.pop_front();
                }
                match q.front() {
                    Some((step, _)) if *step == s => q.pop_front().map(|(_, g)| g),
                    _ => None,
                }
            })
            .collect();
        let norms: Vec<Option<f64>> = grads.iter().map(|g| g.as_ref().map(Matrix::frobenius_norm)).collect();
        let mut p = 0;
        for i in 0..lineup.len() {
            for j in i + 1..lineup.len() {
                let summary = &mut pairs[p];
                p += 1;
                let (Some(gx), Some(gy)) = (&grads[i], &grads[j]) else {
                    continue;
                };
                match cosine(gx, gy) {
                    Some(c) => {
                        summary.record(c);
                        sink(&AlignmentRecord {
                            step: s,
                            x: lineup[i],
                            y: lineup[j],
                            cosine: c,
                            norm_x: norms[i].unwrap_or(0.0),
                            norm_y: norms[j].unwrap_or(0.0),
                        });
                    }
                    None => summary.excluded += 1,
                }
            }
        }
    }

    Ok(AlignmentReport {
        driver,
        learners: lineup,
        steps: run.steps,
        pairs,
    })
}

/// Every learner that emits one gradient per parameter application.
pub const SWEEP_LEARNERS: [Algorithm; 9] = [
    Algorithm::Rtrl,
    Algorithm::FBptt,
    Algorithm::Uoro,
    Algorithm::KfRtrl,
    Algorithm::RKfRtrl,
    Algorithm::Kernl,
    Algorithm::Rflo,
    Algorithm::Dni,
    Algorithm::DniB,
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TaskKind;
    use proptest::prelude::*;

    #[test]
    fn identical_and_opposite_gradients() {
        let g = Matrix::from_vec(2, 2, vec![1.0, -2.0, 0.5, 3.0]);
        assert!((cosine(&g, &g).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine(&g, &g.scaled(-1.0)).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(cosine(&g, &Matrix::zeros(2, 2)), None);
    }

    #[test]
    fn bins_cover_closed_interval() {
        assert_eq!(histogram_bin(-1.0), 0);
        assert_eq!(histogram_bin(1.0), HISTOGRAM_BINS - 1);
        assert_eq!(histogram_bin(0.0), HISTOGRAM_BINS / 2);
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_bounded_and_scale_free(
            a in prop::collection::vec(-5.0f64..5.0, 6),
            b in prop::collection::vec(-5.0f64..5.0, 6),
            s in 0.1f64..10.0,
        ) {
            let ga = Matrix::from_vec(2, 3, a);
            let gb = Matrix::from_vec(2, 3, b);
            if let (Some(c1), Some(c2)) = (cosine(&ga, &gb), cosine(&gb, &ga)) {
                prop_assert!((c1 - c2).abs() < 1e-12);
                prop_assert!(c1.abs() <= 1.0 + 1e-12);
                let c3 = cosine(&ga, &gb.scaled(s)).unwrap();
                prop_assert!((c1 - c3).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn driver_paired_with_itself_is_perfectly_aligned() {
        let run = RunConfig::new(TaskKind::Add, Algorithm::Rtrl).with_steps(200).with_seed(1);
        let mut f_vs_f = Vec::new();
        let report = alignment_sweep(&run, &[Algorithm::Rtrl, Algorithm::FBptt, Algorithm::Rflo], |r| {
            f_vs_f.push(*r);
        })
        .unwrap();
        assert_eq!(report.mean(Algorithm::Rtrl, Algorithm::Rtrl), Some(1.0));
        let pair = report.pair(Algorithm::Rtrl, Algorithm::FBptt).unwrap();
        assert_eq!(pair.count + pair.excluded, 200 - 9);
        assert!(f_vs_f.iter().all(|r| r.cosine.abs() <= 1.0));
    }

    #[test]
    fn sweep_matches_independent_replay() {
        let run = RunConfig::new(TaskKind::Add, Algorithm::Rtrl).with_steps(50).with_seed(2);
        let mut records = Vec::new();
        alignment_sweep(&run, &[Algorithm::Rtrl, Algorithm::Rflo], |r| records.push(*r)).unwrap();

        let mut sim = Simulation::new(&run).unwrap();
        let mut rtrl = build_learner(&run, &sim.cfg, &sim.params, Algorithm::Rtrl).unwrap();
        let mut rflo = build_learner(&run, &sim.cfg, &sim.params, Algorithm::Rflo).unwrap();
        let mut expected = Vec::new();
        for t in 0..50 {
            let data = sim.advance().unwrap();
            let ctx = data.context(&sim.cfg, &sim.params);
            let g1 = rtrl.update(&ctx).unwrap().unwrap();
            let g2 = rflo.update(&ctx).unwrap().unwrap();
            let (n1, n2) = (g1.frobenius_norm(), g2.frobenius_norm());
            if n1 > 0.0 && n2 > 0.0 {
                expected.push((t, dot(g1.as_slice(), g2.as_slice()) / (n1 * n2)));
            }
            sim.train_readout(&data, run.lr_out()).unwrap();
            rnn::sgd_w(&mut sim.params, &g1, run.lr).unwrap();
        }
        assert_eq!(records.len(), expected.len());
        for (r, (t, c)) in records.iter().zip(expected) {
            assert_eq!((r.step, r.x, r.y), (t, Algorithm::Rtrl, Algorithm::Rflo));
            assert!((r.cosine - c).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_learners_without_per_step_gradients() {
        let run = RunConfig::new(TaskKind::Add, Algorithm::Rtrl).with_steps(5);
        assert!(alignment_sweep(&run, &[Algorithm::EBptt], |_| {}).is_err());
    }
}
