use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GeneralInstance;
use crate::error::{Error, Result};

/// Random 0/1 instance: each cell is 1 independently with probability `d`,
/// `b = 1`, `a = 1`. An all-zero row or column is redrawn until it has an
/// entry, so the instance always has a finite optimum.
pub fn generate_random(rows: usize, cols: usize, density: f64, seed: u64) -> Result<GeneralInstance> {
    if rows == 0 || cols == 0 {
        return Err(Error::Precondition("rows and cols must be at least 1".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Precondition(format!("density {density} not in (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = vec![false; rows * cols];
    for c in cells.iter_mut() {
        *c = rng.random_bool(density);
    }
    for i in 0..rows {
        let row = &mut cells[i * cols..(i + 1) * cols];
        while !row.iter().any(|&b| b) {
            for c in row.iter_mut() {
                *c = rng.random_bool(density);
            }
        }
    }
    for j in 0..cols {
        while !(0..rows).any(|i| cells[i * cols + j]) {
            for i in 0..rows {
                cells[i * cols + j] = rng.random_bool(density);
            }
        }
    }
    let entries = cells
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(k, _)| (k / cols, k % cols, 1.0))
        .collect();
    Ok(GeneralInstance::unit(rows, cols, entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_density_is_all_ones() {
        let g = generate_random(1, 1, 1.0, 3).unwrap();
        assert_eq!(g.entries, vec![(0, 0, 1.0)]);
        let g = generate_random(2, 2, 1.0, 99).unwrap();
        assert_eq!(g.nnz(), 4);
    }

    #[test]
    fn binomial_count_at_quarter_density() {
        // mean 2500, sigma = sqrt(1e4 * 0.25 * 0.75) ~ 43.3
        let g = generate_random(100, 100, 0.25, 7).unwrap();
        assert!((g.nnz() as f64 - 2500.0).abs() <= 175.0, "nnz = {}", g.nnz());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_random(30, 40, 0.1, 5).unwrap();
        let b = generate_random(30, 40, 0.1, 5).unwrap();
        let c = generate_random(30, 40, 0.1, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sparse_instances_have_no_empty_lines() {
        let g = generate_random(50, 60, 0.01, 11).unwrap();
        let mut rows = [0; 50];
        let mut cols = vec![0; 60];
        for &(i, j, _) in &g.entries {
            rows[i] += 1;
            cols[j] += 1;
        }
        assert!(rows.iter().all(|&n| n > 0));
        assert!(cols.iter().all(|&n| n > 0));
    }

    #[test]
    fn empirical_density_within_three_sigma() {
        let d = 0.25;
        let g = generate_random(1000, 1000, d, 2024).unwrap();
        let cells = 1e6;
        let sigma = (d * (1.0 - d) / cells).sqrt();
        let got = g.nnz() as f64 / cells;
        assert!((got - d).abs() <= 3.0 * sigma, "density {got}");
    }

    #[test]
    fn rejects_bad_density() {
        assert!(generate_random(2, 2, 0.0, 1).is_err());
        assert!(generate_random(2, 2, 1.5, 1).is_err());
    }
}
