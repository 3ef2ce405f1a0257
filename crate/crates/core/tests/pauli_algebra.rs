use floquet_core::error::Error;
use floquet_core::pauli_algebra::*;
use ndarray::linalg::kron;
use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// independent kron-product realization
fn kron_dense(p: &PauliString) -> Array2<Complex64> {
    let single = |l: Pauli| -> Array2<Complex64> {
        match l {
            Pauli::I => ndarray::arr2(&[[c(1., 0.), c(0., 0.)], [c(0., 0.), c(1., 0.)]]),
            Pauli::X => ndarray::arr2(&[[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]]),
            Pauli::Y => ndarray::arr2(&[[c(0., 0.), c(0., -1.)], [c(0., 1.), c(0., 0.)]]),
            Pauli::Z => ndarray::arr2(&[[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]]),
        }
    };
    let mut m = ndarray::arr2(&[[c(p.phase(), 0.)]]);
    for &l in p.letters() {
        m = kron(&m, &single(l));
    }
    m
}

fn word_strategy(n: usize) -> impl Strategy<Value = PauliString> {
    proptest::collection::vec(0..4u8, n).prop_map(|v| {
        let letters = v
            .into_iter()
            .map(|k| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][k as usize])
            .collect();
        PauliString::new(letters, 1.0).unwrap()
    })
}

#[test]
fn z_on_single_qubit() {
    let z: PauliString = "Z".parse().unwrap();
    let m = z.dense();
    assert_eq!(m, ndarray::arr2(&[[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]]));
}

#[test]
fn xx_is_antidiagonal() {
    let xx: PauliString = "XX".parse().unwrap();
    let m = xx.dense();
    for r in 0..4 {
        for col in 0..4 {
            let expect = if r + col == 3 { 1.0 } else { 0.0 };
            assert_eq!(m[[r, col]], c(expect, 0.));
        }
    }
}

#[test]
fn parse_and_display() {
    let p: PauliString = "-2.5*xyZI".parse().unwrap();
    assert_eq!(p.word(), "XYZI");
    assert_eq!(p.phase(), -2.5);
    assert_eq!(p.weight(), 3);
    assert_eq!(p.to_string().parse::<PauliString>().unwrap(), p);
    assert!("XQ".parse::<PauliString>().is_err());
    assert!("".parse::<PauliString>().is_err());
}

#[test]
fn cap_is_enforced() {
    assert!(matches!(
        PauliString::identity(13),
        Err(Error::DimensionCap { qubits: 13, .. })
    ));
    assert!(matches!(
        build_basis(&LatticeSpec::chain(13, true), Model::Ising),
        Err(Error::DimensionCap { .. })
    ));
    assert!(matches!(
        build_basis(&LatticeSpec::grid(3, 5, true), Model::Ising),
        Err(Error::DimensionCap { .. })
    ));
}

#[test]
fn chain6_periodic_ising_has_twelve_terms() {
    let b = build_basis(&LatticeSpec::chain(6, true), Model::Ising).unwrap();
    assert_eq!(b.len(), 12);
    assert_eq!(b.word(0).word(), "ZZIIII");
    assert_eq!(b.word(1).word(), "ZIIIIZ");
    assert_eq!(b.word(5).word(), "IIIIZZ");
    assert_eq!(b.word(6).word(), "XIIIII");
    assert_eq!(b.terms()[1].sites, vec![0, 5]);
}

#[test]
fn chain2_open_ising_has_three_terms() {
    let b = build_basis(&LatticeSpec::chain(2, false), Model::Ising).unwrap();
    let words: Vec<_> = b.words().map(|w| w.word()).collect();
    assert_eq!(words, ["ZZ", "XI", "IX"]);
}

#[test]
fn grid_2x3_periodic_heisenberg_matches_brute_force_edges() {
    // brute force: all unordered pairs at torus distance one
    let (rows, cols) = (2usize, 3usize);
    let mut count = 0;
    for a in 0..rows * cols {
        for b in a + 1..rows * cols {
            let (ra, ca) = (a / cols, a % cols);
            let (rb, cb) = (b / cols, b % cols);
            let dr = (ra as i64 - rb as i64).rem_euclid(rows as i64);
            let dc = (ca as i64 - cb as i64).rem_euclid(cols as i64);
            let dr = dr.min(rows as i64 - dr);
            let dc = dc.min(cols as i64 - dc);
            if dr + dc == 1 {
                count += 1;
            }
        }
    }
    let lattice = LatticeSpec::grid(rows, cols, true);
    assert_eq!(lattice.edges().len(), count);
    assert_eq!(count, 9);
    let b = build_basis(&lattice, Model::Heisenberg).unwrap();
    assert_eq!(b.len(), 3 * count + 6);
}

#[test]
fn periodic_edge_counts() {
    assert_eq!(LatticeSpec::chain(6, true).edges().len(), 6);
    assert_eq!(LatticeSpec::chain(6, false).edges().len(), 5);
    assert_eq!(LatticeSpec::grid(3, 4, true).edges().len(), 24);
    assert_eq!(LatticeSpec::grid(3, 3, false).edges().len(), 12);
}

#[test]
fn basis_terms_are_distinct_and_trace_orthogonal() {
    for (lat, model) in [
        (LatticeSpec::chain(4, true), Model::Heisenberg),
        (LatticeSpec::grid(2, 2, true), Model::Ising),
    ] {
        let b = build_basis(&lat, model).unwrap();
        let d = 1usize << b.num_qubits();
        let dense: Vec<_> = b.words().map(|w| w.dense()).collect();
        for (a, ma) in dense.iter().enumerate() {
            assert_eq!(ma, &ma.t().mapv(|v| v.conj()));
            for (bb, mb) in dense.iter().enumerate() {
                let tr: Complex64 = ma.dot(mb).diag().sum();
                let expect = if a == bb { d as f64 } else { 0.0 };
                assert!((tr - c(expect, 0.)).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn pauli_sum_commutator_matches_dense() {
    let a: PauliString = "XZY".parse().unwrap();
    let b: PauliString = "ZZI".parse().unwrap();
    let mut sa = PauliSum::new(3);
    sa.push(a.to_sparse());
    let mut sb = PauliSum::new(3);
    sb.push(b.to_sparse());
    let comm = PauliSum::commutator(&sa, &sb).to_dense();
    let (da, db) = (kron_dense(&a), kron_dense(&b));
    let expect = da.dot(&db) - db.dot(&da);
    assert!((&comm - &expect).iter().all(|v| v.norm() < 1e-14));
}

#[test]
fn basis_record_round_trip() {
    let b = build_basis(&LatticeSpec::grid(2, 2, false), Model::Heisenberg).unwrap();
    let json = serde_json::to_string(&b).unwrap();
    assert!(json.contains("\"ZZII\""));
    let back: OperatorBasis = serde_json::from_str(&json).unwrap();
    assert_eq!(back, b);
    let tampered = json.replacen("ZZII", "YYII", 1);
    assert!(serde_json::from_str::<OperatorBasis>(&tampered).is_err());
}

proptest! {
    #[test]
    fn dense_matches_kron_and_squares_to_identity(p in word_strategy(3), phase in prop_oneof![Just(1.0), Just(-1.0)]) {
        let p = p.with_phase(phase);
        let m = p.dense();
        prop_assert_eq!(&m, &kron_dense(&p));
        // hermitian exactly
        prop_assert_eq!(&m, &m.t().mapv(|v| v.conj()));
        let sq = m.dot(&m);
        for ((r, col), v) in sq.indexed_iter() {
            let expect = if r == col { 1.0 } else { 0.0 };
            prop_assert!((v - c(expect, 0.)).norm() < 1e-14);
        }
    }

    #[test]
    fn sparse_product_matches_dense_product(a in word_strategy(3), b in word_strategy(3)) {
        let prod = a.to_sparse().mul(&b.to_sparse());
        let mut s = PauliSum::new(3);
        s.push(prod);
        let expect = kron_dense(&a).dot(&kron_dense(&b));
        prop_assert!((&s.to_dense() - &expect).iter().all(|v| v.norm() < 1e-14));
    }

    #[test]
    fn block_apply_matches_dense(a in word_strategy(3), w in -2.0..2.0f64) {
        let mut s = PauliSum::new(3);
        let mut sp = a.to_sparse();
        sp.coef *= w;
        s.push(sp);
        s.push(SparsePauli { x: 0b101, z: 0b011, coef: c(0.3, -0.2) });
        let block = Array2::from_shape_fn((8, 3), |(r, k)| c(r as f64 - k as f64, (r * k) as f64 * 0.1));
        let mut out = Array2::zeros((0, 0));
        s.apply_block(block.view(), &mut out);
        let expect = s.to_dense().dot(&block);
        prop_assert!((&out - &expect).iter().all(|v| v.norm() < 1e-12));
    }
}
