#![allow(dead_code)]

use lge_quant::phantom::{generate, PhantomConfig};
use lge_quant::rician::RicianMixtureParams;
use lge_quant::Vec3;
use rand::Rng;

/// Shifted Rayleigh density written out from the model definition.
pub fn pr_ray(x: f64, p: &RicianMixtureParams<f64>) -> f64 {
    let s = x + p.a;
    if s <= 0.0 {
        return 0.0;
    }
    p.alpha_r * s / (p.sigma_r * p.sigma_r) * (-(s * s) / (2.0 * p.sigma_r * p.sigma_r)).exp()
}

pub fn pr_gau(x: f64, p: &RicianMixtureParams<f64>) -> f64 {
    let z = (x - p.mu) / p.sigma_g;
    p.alpha_g / ((2.0 * std::f64::consts::PI).sqrt() * p.sigma_g) * (-0.5 * z * z).exp()
}

pub fn mixture(x: f64, p: &RicianMixtureParams<f64>) -> f64 {
    pr_ray(x, p) + pr_gau(x, p)
}

/// `-ln Pr(i | l)` with the likelihood clamped into `[1e-12, 1]`.
pub fn label_cost(i: f64, label: u8, p: &RicianMixtureParams<f64>) -> f64 {
    let like = if label == 1 {
        if i <= p.mu { pr_gau(i, p) } else { 1.0 }
    } else if i >= p.sigma_r - p.a {
        pr_ray(i, p)
    } else {
        1.0
    };
    -like.clamp(1e-12, 1.0).ln()
}

/// Brute-force energy: data term over masked voxels plus the clique potential
/// summed over every voxel and each of its masked 6-neighbours.
pub fn oracle_energy(
    dims: [usize; 3],
    spacing: [f64; 3],
    intensity: &[f64],
    mask: &[bool],
    labels: &[u8],
    p: &RicianMixtureParams<f64>,
    lambda: f64,
    sigma: f64,
) -> f64 {
    let [nx, ny, nz] = dims;
    let idx = |x: usize, y: usize, z: usize| (z * ny + y) * nx + x;
    let mut data = 0.0;
    let mut pair = 0.0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = idx(x, y, z);
                if !mask[i] {
                    continue;
                }
                data += label_cost(intensity[i], labels[i], p);
                let mut nbrs = Vec::new();
                if x > 0 {
                    nbrs.push((idx(x - 1, y, z), spacing[0]));
                }
                if x + 1 < nx {
                    nbrs.push((idx(x + 1, y, z), spacing[0]));
                }
                if y > 0 {
                    nbrs.push((idx(x, y - 1, z), spacing[1]));
                }
                if y + 1 < ny {
                    nbrs.push((idx(x, y + 1, z), spacing[1]));
                }
                if z > 0 {
                    nbrs.push((idx(x, y, z - 1), spacing[2]));
                }
                if z + 1 < nz {
                    nbrs.push((idx(x, y, z + 1), spacing[2]));
                }
                for (j, dist) in nbrs {
                    if mask[j] && labels[j] != labels[i] {
                        let d = intensity[i] - intensity[j];
                        pair += (-(d * d) / (2.0 * sigma * sigma)).exp() * spacing[0] / dist;
                    }
                }
            }
        }
    }
    lambda * data + pair
}

/// Per-slice translations with both in-plane components uniform in `±limit` mm.
pub fn in_plane_translations<R: Rng>(cfg: &PhantomConfig, limit: f64, rng: &mut R) -> Vec<[f64; 3]> {
    let (ds, _) = generate::<f64>(&PhantomConfig { translations: vec![], ..cfg.clone() }).unwrap();
    ds.sa
        .iter()
        .chain(ds.la.iter().map(|(_, s)| s))
        .map(|s| {
            let t = s.pose.iop_row * rng.random_range(-limit..limit) + s.pose.iop_col * rng.random_range(-limit..limit);
            t.to_array()
        })
        .collect()
}

pub fn normals(cfg: &PhantomConfig) -> Vec<Vec3<f64>> {
    let (ds, _) = generate::<f64>(&PhantomConfig { translations: vec![], ..cfg.clone() }).unwrap();
    ds.sa.iter().chain(ds.la.iter().map(|(_, s)| s)).map(|s| s.pose.normal()).collect()
}

/// Error of each slice's corrected position relative to the anchor.
pub fn relative_errors(corrected: &[Vec3<f64>], truth: &[Vec3<f64>], anchor: usize) -> Vec<Vec3<f64>> {
    corrected.iter().zip(truth).map(|(&c, &t)| (c - corrected[anchor]) - (t - truth[anchor])).collect()
}
