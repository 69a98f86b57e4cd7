//! File-format checks at realistic scale: assemble the consistent mass
//! matrix of a quadrilateral mesh of 8-node serendipity elements, push it
//! through the Matrix Market writer and reader, and make sure nothing in the
//! pipeline bends at a few hundred thousand entries.

use arrabit_core::{SparseSymMatrix, SymOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Element mass matrix of the 8-node serendipity quadrilateral, times 45.
const ELEMENT: [[f64; 8]; 8] = [
    [6.0, -6.0, 2.0, -8.0, 3.0, -8.0, 2.0, -6.0],
    [-6.0, 32.0, -6.0, 20.0, -8.0, 16.0, -8.0, 20.0],
    [2.0, -6.0, 6.0, -6.0, 2.0, -8.0, 3.0, -8.0],
    [-8.0, 20.0, -6.0, 32.0, -6.0, 20.0, -8.0, 16.0],
    [3.0, -8.0, 2.0, -6.0, 6.0, -6.0, 2.0, -8.0],
    [-8.0, 16.0, -8.0, 20.0, -6.0, 32.0, -6.0, 20.0],
    [2.0, -8.0, 3.0, -8.0, 2.0, -6.0, 6.0, -6.0],
    [-6.0, 20.0, -8.0, 16.0, -8.0, 20.0, -6.0, 32.0],
];

/// Assembles the mesh mass matrix with a random coefficient per element.
/// Nodes sit on element corners and edge midpoints; the dimension is
/// `3 nx ny + 2 nx + 2 ny + 1`.
fn serendipity_mass_matrix(nx: usize, ny: usize, seed: u64) -> SparseSymMatrix {
    let n = 3 * nx * ny + 2 * nx + 2 * ny + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triplets = Vec::with_capacity(36 * nx * ny);
    for j in 1..=ny {
        for i in 1..=nx {
            // Global node numbers of this element, counterclockwise from the
            // top-right corner, 1-based.
            let nn1 = 3 * j * nx + 2 * i + 2 * j + 1;
            let nn4 = (3 * j - 1) * nx + 2 * j + i - 1;
            let nn5 = (3 * j - 3) * nx + 2 * i + 2 * j - 3;
            let nodes = [nn1, nn1 - 1, nn1 - 2, nn4, nn5, nn5 + 1, nn5 + 2, nn4 + 1];
            let rho: f64 = rng.gen_range(1.0..100.0);
            for (kr, &gr) in nodes.iter().enumerate() {
                for (kc, &gc) in nodes.iter().enumerate() {
                    // One triangle only; the constructor mirrors it.
                    if gr <= gc {
                        triplets.push((gr - 1, gc - 1, rho * ELEMENT[kr][kc] / 45.0));
                    }
                }
            }
        }
    }
    SparseSymMatrix::from_triplets(n, &triplets).expect("assembled mesh is symmetric")
}

#[test]
fn mesh_matrix_has_the_expected_shape_and_survives_the_file_format() {
    let m = serendipity_mass_matrix(100, 100, 42);
    assert_eq!(m.n(), 30401);
    assert_eq!(m.nnz(), 471601);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mesh.mtx");
    arrabit::save_matrix_market(&path, &m).unwrap();
    let back = arrabit::load_matrix_market(&path).unwrap();

    assert_eq!(back.n(), m.n());
    assert_eq!(back.nnz(), m.nnz());
    assert_eq!(back.row_ptr(), m.row_ptr());
    assert_eq!(back.col_idx(), m.col_idx());
    assert_eq!(back.values(), m.values(), "values round-trip bitwise");

    // A second write must reproduce the first file byte for byte.
    let again = dir.path().join("mesh2.mtx");
    arrabit::save_matrix_market(&again, &back).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn mesh_solve_finds_the_dominant_pairs() {
    // A smaller mesh keeps the solve quick while still exercising real
    // unstructured sparsity.
    let m = serendipity_mass_matrix(12, 12, 7);
    assert_eq!(m.n(), 3 * 144 + 49);
    let mut cfg = arrabit_core::SolverConfig::new(6);
    cfg.tol = 1e-8;
    let out = arrabit_core::solve(&m, &cfg).unwrap();
    assert!(out.status.is_success(), "status: {:?}", out.status);
    assert!(out.stats.final_maxres <= 1e-7);

    // Residual check against the raw operator: ||A z - lambda z|| small.
    let z = &out.pairs.vectors;
    let az = m.apply_block(z);
    let (lo, hi) = m.gershgorin_bounds();
    let scale = lo.abs().max(hi.abs());
    for (idx, &lambda) in out.pairs.values.iter().enumerate() {
        let mut worst = 0.0f64;
        for r in 0..m.n() {
            let d = az.at(r, idx) - lambda * z.at(r, idx);
            worst = worst.max(d.abs());
        }
        assert!(worst <= 1e-6 * scale, "pair {idx}: residual {worst:e}");
    }
}
