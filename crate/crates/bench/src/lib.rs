//! Shared fixtures for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xspace::net::Arch;
use xspace::{make_space, Space, SpaceKind, SpaceParams, WrappedClassifier};

/// A smooth test signal with a few harmonics.
pub fn signal(n: usize) -> Vec<f64> {
    (0..n)
        .map(|t| {
            let t = t as f64 / n as f64;
            (6.0 * std::f64::consts::TAU * t).sin()
                + 0.5 * (17.0 * std::f64::consts::TAU * t).cos()
                + t
        })
        .collect()
}

pub fn space(kind: SpaceKind, n: usize) -> Space {
    make_space(kind, n, SpaceParams::default()).expect("valid space")
}

/// An untrained convolutional classifier wrapped in the given space.
pub fn wrapped(kind: SpaceKind, n: usize) -> WrappedClassifier {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = Arch::default().build(n, 3, &mut rng).expect("valid arch");
    WrappedClassifier::new(model, space(kind, n)).expect("matching lengths")
}
