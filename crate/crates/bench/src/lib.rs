//! Shared fixtures for the criterion benchmarks in `benches/`.

use qsis_core::sampling::draw_sample_set;
use qsis_core::{Axis, AveragingKernel, ProductDomain, QsisSpace, SampleSet, SamplingDensity};

/// Reference setup: `[-0.5, 1.5)²` with `nodes` points per axis, `K = [0, 1]²`,
/// linear B-splines on a jittered half-unit lattice, box kernel on `[-1/4, 1/4]²`.
pub struct Fixture {
    pub space: QsisSpace,
    pub kernel: AveragingKernel,
    pub density: SamplingDensity,
}

impl Fixture {
    pub fn new(nodes: usize, generators: usize) -> Self {
        let a = Axis::interval(-0.5, 1.5, nodes).expect("valid axis");
        let d = ProductDomain::new([a, a], [[0.0, 1.0]; 2], [[-0.25, 0.25]; 2]).expect("valid domain");
        let space = QsisSpace::bspline_lattice(d, 1, 0.5, generators, [0.5, 0.5], 0.25, 3).expect("valid space");
        let kernel = AveragingKernel::boxed(d.w());
        let density = SamplingDensity::uniform(d.k());
        Self { space, kernel, density }
    }

    pub fn samples(&self, n: usize, m: usize, seed: u64) -> SampleSet {
        draw_sample_set(&self.density, n, m, seed).expect("valid sample sizes")
    }
}
