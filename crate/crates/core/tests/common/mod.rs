#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, RngExt};
use taskswarm::{ProbabilityVector, StochasticMatrix};

/// Random strongly connected support with self-loops: a random Hamiltonian
/// cycle plus independent extra edges with probability `density`.
pub fn random_support<R: Rng + ?Sized>(rng: &mut R, m: usize, density: f64) -> Vec<bool> {
    let mut edges = vec![false; m * m];
    for i in 0..m {
        edges[i * m + i] = true;
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    for w in 0..m {
        let (a, b) = (order[w], order[(w + 1) % m]);
        edges[a * m + b] = true;
    }
    for e in edges.iter_mut() {
        if rng.random::<f64>() < density {
            *e = true;
        }
    }
    edges
}

/// Random row-stochastic matrix on `support` with weights in `[0.05, 1)`.
pub fn random_kernel_on<R: Rng + ?Sized>(rng: &mut R, m: usize, support: &[bool]) -> StochasticMatrix {
    let mut entries = vec![0.0; m * m];
    for i in 0..m {
        let row = &mut entries[i * m..(i + 1) * m];
        for j in 0..m {
            if support[i * m + j] {
                row[j] = rng.random_range(0.05..1.0);
            }
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    StochasticMatrix::new(m, entries).unwrap()
}

pub fn random_irreducible<R: Rng + ?Sized>(rng: &mut R, m: usize) -> StochasticMatrix {
    let density = rng.random_range(0.05..0.5);
    let support = random_support(rng, m, density);
    random_kernel_on(rng, m, &support)
}

pub fn random_target<R: Rng + ?Sized>(rng: &mut R, m: usize) -> ProbabilityVector {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    ProbabilityVector::target(raw.into_iter().map(|v| v / s).collect()).unwrap()
}

pub fn random_chi<R: Rng + ?Sized>(rng: &mut R, m: usize) -> taskswarm::CharacteristicVector {
    taskswarm::CharacteristicVector::new((0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .unwrap()
}

/// Oracle for irreducibility: `Σ_{k=1..M} P^k` has no zero entry.
pub fn irreducible_by_powers(p: &StochasticMatrix) -> bool {
    let m = p.dim();
    let mul = |a: &[f64], b: &[f64]| {
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for k in 0..m {
                let aik = a[i * m + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..m {
                    out[i * m + j] += aik * b[k * m + j];
                }
            }
        }
        out
    };
    let base = p.entries().to_vec();
    let mut power = base.clone();
    let mut acc = base.clone();
    for _ in 1..m {
        power = mul(&power, &base);
        acc.iter_mut().zip(&power).for_each(|(a, b)| *a += b);
    }
    acc.iter().all(|&v| v > 0.0)
}

use std::num::NonZeroUsize;
use taskswarm::{BetaSchedule, Controller, FeedbackParams, GraphSpec, InitialState, ScenarioConfig};

/// 5×7 Moore grid, all mass on corner task 0, uniform target.
pub fn grid_scenario(controller: Controller, epochs: u64) -> ScenarioConfig {
    ScenarioConfig::new(
        GraphSpec::Grid {
            rows: NonZeroUsize::new(5).unwrap(),
            cols: NonZeroUsize::new(7).unwrap(),
        },
        InitialState::OneHot(0),
        ProbabilityVector::uniform(35),
        controller,
        epochs,
    )
}

pub fn distributed(theta: f64, lambda: f64, schedule: BetaSchedule) -> Controller {
    Controller::Distributed(FeedbackParams::new(theta, lambda, schedule).unwrap())
}
