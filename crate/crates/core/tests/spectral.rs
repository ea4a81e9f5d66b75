use gsda_core::linalg::Matrix;
use gsda_core::spectral::{
    band_energy, build_knn_graph, dct1d, eigendecompose, idct1d, laplacian, BandBounds, KnnGraph,
};
use gsda_core::{PointCloud, Point, SpectralBasis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi rotations; slow but independent of the production solver.
fn jacobi_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    vals.sort_by(f64::total_cmp);
    vals
}

fn random_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Point> = (0..n)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    PointCloud::new(pts).unwrap()
}

fn max_orthonormality_error(basis: &SpectralBasis) -> f64 {
    let u = basis.vectors();
    let gram = u.transpose().matmul(u);
    let n = gram.rows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

#[test]
fn eight_point_basis_matches_jacobi_oracle() {
    for seed in 0..10 {
        let cloud = random_cloud(8, seed);
        let l = laplacian(&build_knn_graph(&cloud, 3).unwrap());
        let basis = eigendecompose(&l).unwrap();
        let oracle = jacobi_eigenvalues(&l);
        for (a, b) in basis.eigenvalues().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "seed {seed}: {a} vs {b}");
        }
        assert!(max_orthonormality_error(&basis) < 1e-8);
        // L u_i = lambda_i u_i
        let lu = l.matmul(basis.vectors());
        for i in 0..8 {
            for j in 0..8 {
                let expect = basis.eigenvalues()[j] * basis.vectors()[(i, j)];
                assert!((lu[(i, j)] - expect).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn constant_signal_lands_in_dc() {
    let cloud = random_cloud(40, 3);
    let graph = build_knn_graph(&cloud, 6).unwrap();
    assert_eq!(graph.components(), 1);
    let basis = SpectralBasis::from_cloud(&cloud, 6).unwrap();
    let u0 = basis.vector(0);
    let inv = 1.0 / (40f64).sqrt();
    assert!(u0.iter().all(|v| (v - inv).abs() < 1e-8), "sign convention makes u0 positive");

    let coeffs = basis.gft(&vec![[1.0, 1.0, 1.0]; 40]).unwrap();
    assert!((coeffs.rows()[0][0] - (40f64).sqrt()).abs() < 1e-8);
    assert!(coeffs.rows()[1..].iter().all(|r| r.iter().all(|v| v.abs() < 1e-8)));
}

#[test]
fn eigenvector_signal_has_unit_coefficient() {
    let cloud = random_cloud(24, 5);
    let basis = SpectralBasis::from_cloud(&cloud, 4).unwrap();
    for k in [0, 7, 23] {
        let uk = basis.vector(k);
        let signal: Vec<Point> = uk.iter().map(|&v| [v, 0.0, 0.0]).collect();
        let c = basis.gft(&signal).unwrap();
        for (i, row) in c.rows().iter().enumerate() {
            let expect = if i == k { 1.0 } else { 0.0 };
            assert!((row[0] - expect).abs() < 1e-10);
        }
    }
}

#[test]
fn index_zero_only_reconstructs_constant() {
    let cloud = random_cloud(16, 8);
    let basis = SpectralBasis::from_cloud(&cloud, 4).unwrap();
    let mut c = gsda_core::SpectralCoeffs::zeros(16);
    c.0[0] = [2.0, -1.0, 0.5];
    let out = basis.igft(&c).unwrap();
    for p in &out {
        for k in 0..3 {
            assert!((p[k] - out[0][k]).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_multiplicity_counts_components() {
    // Two clusters far apart -> two components for small K.
    let mut pts: Vec<Point> = random_cloud(10, 1).points().to_vec();
    pts.extend(random_cloud(10, 2).points().iter().map(|p| [p[0] + 50.0, p[1], p[2]]));
    let cloud = PointCloud::new(pts).unwrap();
    let graph = build_knn_graph(&cloud, 3).unwrap();
    assert_eq!(graph.components(), 2);
    let basis = eigendecompose(&laplacian(&graph)).unwrap();
    let zeros = basis.eigenvalues().iter().filter(|l| l.abs() < 1e-8).count();
    assert_eq!(zeros, 2);
}

#[test]
fn dct_round_trip_random() {
    let cloud = random_cloud(16, 21);
    let back = idct1d(&dct1d(cloud.points()));
    for (a, b) in back.iter().zip(cloud.points()) {
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-9);
        }
    }
}

#[test]
fn dct_basis_diagonalizes_path_laplacian() {
    let n = 12;
    let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let l = laplacian(&KnnGraph::from_edges(n, &edges).unwrap());
    let dct = SpectralBasis::dct(n);
    let lu = l.matmul(dct.vectors());
    for i in 0..n {
        for j in 0..n {
            let expect = dct.eigenvalues()[j] * dct.vectors()[(i, j)];
            assert!((lu[(i, j)] - expect).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_invariants(seed in any::<u64>(), n in 12usize..48, k in 2usize..8) {
        let cloud = random_cloud(n, seed);
        let basis = SpectralBasis::from_cloud(&cloud, k).unwrap();
        prop_assert!(max_orthonormality_error(&basis) < 1e-8);
        prop_assert!(basis.eigenvalues()[0].abs() < 1e-8);
        prop_assert!(basis.eigenvalues().windows(2).all(|w| w[0] <= w[1]));

        let coeffs = basis.gft(cloud.points()).unwrap();
        for col in 0..3 {
            let e_sig: f64 = cloud.points().iter().map(|p| p[col] * p[col]).sum();
            let e_hat: f64 = coeffs.rows().iter().map(|r| r[col] * r[col]).sum();
            prop_assert!((e_sig - e_hat).abs() <= 1e-8 * e_sig.max(1e-300));
        }
        let back = basis.igft(&coeffs).unwrap();
        for (a, b) in back.iter().zip(cloud.points()) {
            for c in 0..3 {
                prop_assert!((a[c] - b[c]).abs() < 1e-9);
            }
        }
        let again = basis.gft(&back).unwrap();
        for (a, b) in again.rows().iter().zip(coeffs.rows()) {
            for c in 0..3 {
                prop_assert!((a[c] - b[c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn band_fractions_sum_to_one(seed in any::<u64>(), lo in 0usize..20, span in 0usize..20) {
        let cloud = random_cloud(40, seed);
        let basis = SpectralBasis::from_cloud(&cloud, 5).unwrap();
        let coeffs = basis.gft(cloud.points()).unwrap();
        let hi = (lo + span).min(40);
        let e = band_energy(&coeffs, BandBounds::new(lo, hi, 40).unwrap()).unwrap();
        prop_assert!(e.low >= 0.0 && e.mid >= 0.0 && e.high >= 0.0);
        prop_assert!((e.low + e.mid + e.high - 1.0).abs() < 1e-12);
    }

    #[test]
    fn knn_graph_is_permutation_equivariant(seed in any::<u64>(), k in 1usize..6) {
        let cloud = random_cloud(20, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let mut perm: Vec<usize> = (0..20).collect();
        for i in (1..20).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        // permuted[i] = original[perm[i]]
        let permuted = cloud.select(&perm).unwrap();
        let g = build_knn_graph(&cloud, k).unwrap();
        let gp = build_knn_graph(&permuted, k).unwrap();
        for i in 0..20 {
            prop_assert!(g.degree(perm[i]) >= k);
            for j in 0..20 {
                prop_assert_eq!(gp.has_edge(i, j), g.has_edge(perm[i], perm[j]));
            }
        }
        let adj = g.adjacency();
        prop_assert_eq!(adj.asymmetry(), 0.0);
        prop_assert!((0..20).all(|i| adj[(i, i)] == 0.0));
    }
}
