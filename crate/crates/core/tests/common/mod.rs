//! Shared model catalog for the integration suites: a spread of network
//! sizes, combination policies, and step-size policies, all calibrated so
//! that every stability gate passes at the nominal step sizes.

use asyncdiff::blockalg::CVec;
use asyncdiff::netmodel::{
    diag_ru, AsyncNetworkModel, CombinationPolicy, LinkProbs, QuadraticScenario, RMat,
    StepSizePolicy, Topology,
};
use num_complex::Complex64;

/// Heterogeneous quadratic task: per-agent regressor powers spread over
/// roughly [0.8, 1.3] and noise powers over [0.008, 0.017].
pub fn scenario(n: usize, m: usize, perturb_eps: f64) -> QuadraticScenario {
    let w_o = CVec::from_fn(m, |i, _| Complex64::new(1.0 - 0.3 * i as f64, 0.4));
    let r_u = (0..n)
        .map(|k| {
            let d: Vec<f64> = (0..m).map(|j| 0.8 + 0.05 * k as f64 + 0.1 * j as f64).collect();
            diag_ru(&d)
        })
        .collect();
    let sigma_v2 = (0..n).map(|k| 0.008 + 0.001 * k as f64).collect();
    QuadraticScenario { m, w_o, r_u, sigma_v2, perturb_eps }
}

/// Left-stochastic averaging matrix with uniform weight `1/|N_k|` on each
/// in-neighborhood of the given topology.
pub fn uniform_fixed(topology: &Topology) -> RMat {
    let n = topology.n();
    let mut a = RMat::zeros(n, n);
    for k in 0..n {
        let nbrs = topology.neighbors(k);
        for &l in nbrs {
            a[(l, k)] = 1.0 / nbrs.len() as f64;
        }
    }
    a
}

fn model(
    topology: Topology,
    combination: CombinationPolicy,
    steps: StepSizePolicy,
    m: usize,
) -> AsyncNetworkModel {
    let n = topology.n();
    AsyncNetworkModel { topology, combination, steps, scenario: scenario(n, m, 0.0) }
}

/// Named model catalog used by the Perron, spectral, and rate suites:
/// twelve gate-passing models mixing fixed, Bernoulli-link, and gossip
/// combinations over N in {2, 5, 10}.
pub fn catalog() -> Vec<(&'static str, AsyncNetworkModel)> {
    let mut out = Vec::new();

    out.push((
        "fixed-asym-n2",
        model(
            Topology::complete(2),
            CombinationPolicy::Fixed(RMat::from_row_slice(2, 2, &[0.7, 0.2, 0.3, 0.8])),
            StepSizePolicy::Constant { mu: vec![0.005, 0.004] },
            1,
        ),
    ));
    out.push((
        "bernoulli-n2",
        model(
            Topology::complete(2),
            CombinationPolicy::BernoulliLinks { q: LinkProbs::Uniform(0.7) },
            StepSizePolicy::BernoulliOnOff { mu0: vec![0.004, 0.003], q: vec![0.8, 0.9] },
            1,
        ),
    ));
    out.push((
        "gossip-n2",
        model(
            Topology::complete(2),
            CombinationPolicy::Gossip { beta: 0.5 },
            StepSizePolicy::Constant { mu: vec![0.004, 0.005] },
            1,
        ),
    ));
    let ring5 = Topology::ring(5);
    out.push((
        "fixed-ring-n5",
        model(
            ring5.clone(),
            CombinationPolicy::Fixed(uniform_fixed(&ring5)),
            StepSizePolicy::UniformRange { mu_max: vec![0.005, 0.004, 0.006, 0.0045, 0.005] },
            1,
        ),
    ));
    out.push((
        "bernoulli-perlink-n5",
        model(
            ring5.clone(),
            CombinationPolicy::BernoulliLinks {
                q: LinkProbs::PerLink(vec![
                    vec![0.6, 0.9],
                    vec![0.7, 0.8],
                    vec![0.9, 0.6],
                    vec![0.8, 0.7],
                    vec![0.75, 0.85],
                ]),
            },
            StepSizePolicy::BernoulliOnOff {
                mu0: vec![0.0035, 0.003, 0.004, 0.0032, 0.0038],
                q: vec![0.7, 0.85, 0.9, 0.75, 0.8],
            },
            1,
        ),
    ));
    out.push((
        "gossip-ring-n5",
        model(
            ring5,
            CombinationPolicy::Gossip { beta: 0.3 },
            StepSizePolicy::BernoulliOnOff {
                mu0: vec![0.003, 0.0035, 0.0025, 0.004, 0.003],
                q: vec![0.8, 0.7, 0.9, 0.75, 0.85],
            },
            1,
        ),
    ));
    out.push((
        "bernoulli-complete-n5",
        model(
            Topology::complete(5),
            CombinationPolicy::BernoulliLinks { q: LinkProbs::Uniform(0.5) },
            StepSizePolicy::UniformRange { mu_max: vec![0.005; 5] },
            1,
        ),
    ));
    out.push((
        "gossip-geom-n5",
        model(
            Topology::random_geometric(5, 0.9, 11),
            CombinationPolicy::Gossip { beta: 0.5 },
            StepSizePolicy::Constant { mu: vec![0.004, 0.0035, 0.005, 0.003, 0.0045] },
            1,
        ),
    ));
    let complete10 = Topology::complete(10);
    out.push((
        "fixed-complete-n10",
        model(
            complete10.clone(),
            CombinationPolicy::Fixed(uniform_fixed(&complete10)),
            StepSizePolicy::Constant {
                mu: (0..10).map(|k| 0.003 + 0.0002 * k as f64).collect(),
            },
            1,
        ),
    ));
    out.push((
        "bernoulli-ring-n10",
        model(
            Topology::ring(10),
            CombinationPolicy::BernoulliLinks { q: LinkProbs::Uniform(0.8) },
            StepSizePolicy::BernoulliOnOff {
                mu0: vec![0.003; 10],
                q: (0..10).map(|k| 0.7 + 0.02 * k as f64).collect(),
            },
            1,
        ),
    ));
    out.push((
        "gossip-complete-n10",
        model(
            complete10,
            CombinationPolicy::Gossip { beta: 0.6 },
            StepSizePolicy::UniformRange { mu_max: vec![0.005; 10] },
            1,
        ),
    ));
    out.push((
        "fixed-m2-n2",
        model(
            Topology::complete(2),
            CombinationPolicy::Fixed(RMat::from_row_slice(2, 2, &[0.6, 0.3, 0.4, 0.7])),
            StepSizePolicy::Constant { mu: vec![0.004, 0.005] },
            2,
        ),
    ));
    out
}

/// Small two-agent model with fixed combiner and constant steps, used by
/// the long-term-model gap suites; `perturb_eps` selects the pure
/// quadratic task (0.0) or the smoothly perturbed one.
pub fn gap_model(perturb_eps: f64) -> AsyncNetworkModel {
    AsyncNetworkModel {
        topology: Topology::complete(2),
        combination: CombinationPolicy::Fixed(RMat::from_row_slice(
            2,
            2,
            &[0.7, 0.2, 0.3, 0.8],
        )),
        steps: StepSizePolicy::Constant { mu: vec![0.008, 0.006] },
        scenario: scenario(2, 1, perturb_eps),
    }
}

/// Five-agent gossip model with on-off steps for the step-size sweeps.
pub fn sweep_model() -> AsyncNetworkModel {
    AsyncNetworkModel {
        topology: Topology::ring(5),
        combination: CombinationPolicy::Gossip { beta: 0.5 },
        steps: StepSizePolicy::BernoulliOnOff {
            mu0: vec![0.003, 0.0035, 0.0025, 0.004, 0.003],
            q: vec![0.8, 0.7, 0.9, 0.75, 0.85],
        },
        scenario: scenario(5, 1, 0.0),
    }
}
