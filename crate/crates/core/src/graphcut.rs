//! Two-label MRF classification of infarct versus normal myocardium, solved
//! exactly by a single minimum s/t cut.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maxflow::Graph;
use crate::rician::{gaussian_term, rayleigh_shifted, RicianMixtureParams};
use crate::scalar::Real;
use crate::volume::{Labeling, MyocardiumVolume};

/// Likelihoods are clamped into `[PROBABILITY_FLOOR, 1]` before the logarithm.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// The energy sums the pairwise potential over every voxel and each of its
/// neighbours, so an unordered neighbour pair contributes twice.
pub const PAIR_MULTIPLICITY: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphCutConfig<T> {
    pub lambda: T,
    pub sigma: T,
}

impl<T: Real> GraphCutConfig<T> {
    /// Default weighting with the potential width set to the distance between
    /// the component modes.
    pub fn from_params(params: &RicianMixtureParams<T>) -> Result<Self> {
        let cfg = Self { lambda: T::one(), sigma: params.mode_gap() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > T::zero()) || !(self.sigma > T::zero()) {
            return Err(Error::InvalidConfig(format!("lambda and sigma must be positive ({:?}, {:?})", self.lambda, self.sigma)));
        }
        Ok(())
    }
}

fn neg_ln_clamped<T: Real>(p: T) -> T {
    -p.max(T::lit(PROBABILITY_FLOOR)).min(T::one()).ln()
}

/// Cost of labeling intensity `i` as infarct: free above the Gaussian mode.
pub fn data_cost_infarct<T: Real>(i: T, params: &RicianMixtureParams<T>) -> T {
    if i > params.mu {
        T::zero()
    } else {
        neg_ln_clamped(gaussian_term(i, params))
    }
}

/// Cost of labeling intensity `i` as normal: free below the Rayleigh mode.
pub fn data_cost_normal<T: Real>(i: T, params: &RicianMixtureParams<T>) -> T {
    if i < params.rayleigh_mode() {
        T::zero()
    } else {
        neg_ln_clamped(rayleigh_shifted(i, params))
    }
}

/// Penalty for giving neighbours of intensities `ip`, `iq` different labels;
/// `distance_weight` is the in-plane spacing over the physical neighbour distance.
pub fn interaction_potential<T: Real>(ip: T, iq: T, sigma: T, distance_weight: T) -> T {
    let d = ip - iq;
    (-(d * d) / (T::lit(2.0) * sigma * sigma)).exp() * distance_weight
}

fn axis_weights<T: Real>(volume: &MyocardiumVolume<T>) -> [T; 3] {
    let dx = volume.spacing[0];
    [T::one(), dx / volume.spacing[1], dx / volume.spacing[2]]
}

/// Energy of `labeling`: weighted data costs plus the potential of every
/// differently labeled masked neighbour pair.
pub fn energy<T: Real>(
    volume: &MyocardiumVolume<T>,
    labeling: &Labeling,
    params: &RicianMixtureParams<T>,
    config: &GraphCutConfig<T>,
) -> T {
    let w = axis_weights(volume);
    let mult = T::lit(PAIR_MULTIPLICITY);
    let mut data = T::zero();
    let mut pair = T::zero();
    for i in (0..volume.len()).filter(|&i| volume.mask[i]) {
        let v = volume.intensity[i];
        data = data + if labeling.is_infarct(i) { data_cost_infarct(v, params) } else { data_cost_normal(v, params) };
        for (j, axis) in volume.neighbours(i) {
            if j > i && volume.mask[j] && labeling.labels[i] != labeling.labels[j] {
                pair = pair + mult * interaction_potential(v, volume.intensity[j], config.sigma, w[axis]);
            }
        }
    }
    config.lambda * data + pair
}

/// Globally optimal labeling of the masked voxels. Among equal-energy
/// optima the one with the fewest infarct voxels is returned.
pub fn classify<T: Real>(
    volume: &MyocardiumVolume<T>,
    params: &RicianMixtureParams<T>,
    config: &GraphCutConfig<T>,
) -> Result<Labeling> {
    config.validate()?;
    let nodes: Vec<usize> = (0..volume.len()).filter(|&i| volume.mask[i]).collect();
    if nodes.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut node_of = vec![usize::MAX; volume.len()];
    for (k, &i) in nodes.iter().enumerate() {
        node_of[i] = k;
    }
    let w = axis_weights(volume);
    let mult = T::lit(PAIR_MULTIPLICITY);
    // source side = infarct: cutting source->p labels p normal, p->sink labels it infarct
    let mut graph = Graph::new(nodes.len());
    for (k, &i) in nodes.iter().enumerate() {
        let v = volume.intensity[i];
        graph.add_terminal(k, config.lambda * data_cost_normal(v, params), config.lambda * data_cost_infarct(v, params));
    }
    for (k, &i) in nodes.iter().enumerate() {
        for (j, axis) in volume.neighbours(i) {
            if j > i && volume.mask[j] {
                let cap = mult * interaction_potential(volume.intensity[i], volume.intensity[j], config.sigma, w[axis]);
                graph.add_edge(k, node_of[j], cap, cap);
            }
        }
    }
    let (_, source_side) = graph.solve();
    let mut labeling = Labeling::zeros(volume.dims);
    for (k, &i) in nodes.iter().enumerate() {
        labeling.labels[i] = source_side[k] as u8;
    }
    Ok(labeling)
}

/// Per-voxel argmin of the two data costs (ties to normal).
pub fn threshold_labeling<T: Real>(volume: &MyocardiumVolume<T>, params: &RicianMixtureParams<T>) -> Labeling {
    let mut l = Labeling::zeros(volume.dims);
    for i in (0..volume.len()).filter(|&i| volume.mask[i]) {
        let v = volume.intensity[i];
        l.labels[i] = (data_cost_infarct(v, params) < data_cost_normal(v, params)) as u8;
    }
    l
}
