use nalgebra::{DMatrix, SymmetricEigen};

use crate::config_space::ConfigSpace;
use crate::error::{Error, Result};
use crate::lift::LiftedGenerator;
use crate::report::{DefectReport, MaxTracker};
use crate::transport::config_distance;

/// Eigenvalues below this (relative to the spectral radius) count as zero.
const KERNEL_REL_TOL: f64 = 1e-9;

/// `D^{1/2} L D^{-1/2}` restricted to `range`, symmetric when `μ` is reversible.
fn symmetrized(gen: &LiftedGenerator<f64>, weights: &[f64], range: std::ops::Range<usize>) -> DMatrix<f64> {
    let n = range.len();
    let start = range.start;
    let mut m = DMatrix::zeros(n, n);
    for i in range.clone() {
        m[(i - start, i - start)] = gen.diag(i);
        for (j, r) in gen.row(i) {
            if range.contains(&j) {
                m[(i - start, j - start)] = (weights[i] / weights[j]).sqrt() * r;
            }
        }
    }
    // Average out rounding so the symmetric solver sees an exactly symmetric matrix.
    let t = m.transpose();
    (m + t) * 0.5
}

fn kernel_dim(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> (usize, f64) {
    let radius = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs())).max(1.0);
    let dim = eig.eigenvalues.iter().filter(|v| v.abs() <= KERNEL_REL_TOL * radius).count();
    (dim, radius)
}

/// Invariant sets of the lifted dynamics are unions of sectors: the kernel of
/// `L^Υ` has one dimension per sector, each sector block has a kernel spanned
/// by its constant vector, and configurations in different sectors sit at
/// infinite distance.
pub fn suite_irreducibility(space: &ConfigSpace<f64>, weights: &[f64]) -> Result<Vec<DefectReport>> {
    if weights.len() != space.len() || weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidArgument("structure check needs a strictly positive reversible measure".into()));
    }
    let gen = LiftedGenerator::new(space);
    let sectors = space.sector_ranges().len();

    let full = SymmetricEigen::new(symmetrized(&gen, weights, 0..space.len()));
    let (dim, _) = kernel_dim(&full);

    let mut blocks = MaxTracker::new();
    for (k, range) in space.sector_ranges().iter().enumerate() {
        let eig = SymmetricEigen::new(symmetrized(&gen, weights, range.clone()));
        let (block_dim, radius) = kernel_dim(&eig);
        blocks.offer((block_dim as f64 - 1.0).abs(), || format!("sector {k} kernel dimension {block_dim}"));
        let (pos, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v.abs() < bv { (i, v.abs()) } else { (bi, bv) });
        // Undo the symmetrization and compare against a constant vector.
        let v: Vec<f64> = range
            .clone()
            .enumerate()
            .map(|(a, i)| eig.eigenvectors[(a, pos)] / weights[i].sqrt())
            .collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let spread = v.iter().fold(0.0_f64, |m, &x| m.max((x - mean).abs())) / mean.abs().max(f64::MIN_POSITIVE);
        blocks.offer(spread, || format!("sector {k} kernel vector not constant (radius {radius})"));
    }

    let mut cross = MaxTracker::new();
    let mut pairs = 0usize;
    if space.base().metric().is_some() {
        for k in 0..sectors {
            for l in (k + 1)..sectors {
                for &(i, j) in &[
                    (space.sector(k).start, space.sector(l).start),
                    (space.sector(k).end - 1, space.sector(l).end - 1),
                ] {
                    pairs += 1;
                    let d = config_distance(space.base(), space.config(i), space.config(j))?;
                    cross.offer(if d.is_finite() { 1.0 } else { 0.0 }, || {
                        format!("{} {}", space.config(i), space.config(j))
                    });
                }
            }
        }
    }

    let mut out = vec![
        DefectReport::exact("structure.kernel_dimension", (dim as f64 - sectors as f64).abs(), 0.0, 0.0)
            .with_witness(format!("kernel_dim={dim} sectors={sectors}")),
        DefectReport::exact("structure.sector_kernels", blocks.defect(), 1e-8, 0.0).with_witness(blocks.witness),
    ];
    out.push(if space.base().metric().is_some() {
        DefectReport::exact("structure.cross_sector_infinite", cross.defect(), 0.0, 0.0)
            .with_witness(format!("pairs={pairs} {}", cross.witness))
    } else {
        DefectReport::refused("structure.cross_sector_infinite", "base space has no metric")
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base_space::{build_circle, build_two_state};
    use crate::config_space::{enumerate, poisson_weights};

    fn dims(space: &ConfigSpace<f64>) -> String {
        let pi = poisson_weights(space, 1.0).unwrap();
        let r = suite_irreducibility(space, &pi.weights).unwrap();
        for x in &r {
            assert_eq!(x.pass, Some(true), "{x:?}");
        }
        r[0].witness.clone()
    }

    #[test]
    fn kernel_dimensions() {
        assert_eq!(dims(&enumerate(&build_two_state(1.0).unwrap(), 2).unwrap()), "kernel_dim=3 sectors=3");
        assert_eq!(dims(&enumerate(&build_circle(8, 1.0).unwrap(), 3).unwrap()), "kernel_dim=4 sectors=4");
        assert_eq!(dims(&enumerate(&build_two_state(1.0).unwrap(), 0).unwrap()), "kernel_dim=1 sectors=1");
    }
}
