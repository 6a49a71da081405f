use num_complex::Complex;
use proptest::prelude::*;

use projstate::algebra::{adjoint, embed_observable, mul};
use projstate::gaussian::verify::verify_measure_product;
use projstate::linalg::{self, complex_gaussian, kron, max_abs_diff};
use projstate::state::{duality_check, extend_state, project_state};
use projstate::{
    check_coherence, partial_trace, AlgebraElement, DensityOperator, FactorizedFamily64, GaussianModel64, GaussianSpec,
    IndexSet, Label, Variant,
};

const SITES: u32 = 5;

fn family() -> FactorizedFamily64 {
    FactorizedFamily64::lattice(IndexSet::range(0, SITES), 2).unwrap()
}

fn from_mask(fam: &FactorizedFamily64, mask: u32) -> Label {
    fam.directed().label(IndexSet::new((0..SITES).filter(|i| mask >> i & 1 == 1).collect()))
}

/// A chain lo ⊆ mid ⊆ hi built from three arbitrary masks.
fn chain(fam: &FactorizedFamily64, a: u32, b: u32, c: u32) -> (Label, Label, Label) {
    (from_mask(fam, a), from_mask(fam, a | b), from_mask(fam, a | b | c))
}

fn element(fam: &FactorizedFamily64, l: &Label, seed: u64) -> AlgebraElement<f64> {
    let mut g = projstate::rng::stream(seed, "invariants/element");
    let d = fam.dim(l).unwrap();
    AlgebraElement::new(fam, l.clone(), complex_gaussian(d, d, &mut g)).unwrap()
}

fn density(fam: &FactorizedFamily64, l: &Label, rank: usize, seed: u64) -> DensityOperator<f64> {
    let mut g = projstate::rng::stream(seed, "invariants/density");
    let d = fam.dim(l).unwrap();
    DensityOperator::random(l.clone(), d, rank.clamp(1, d), &mut g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_trace_of_product_is_weighted_factor(da in 1usize..5, db in 1usize..5, seed: u64) {
        let mut g = projstate::rng::stream(seed, "invariants/kron");
        let a = complex_gaussian::<f64, _>(da, da, &mut g);
        let b = complex_gaussian::<f64, _>(db, db, &mut g);
        let reduced = partial_trace(&kron(&a, &b), da, db).unwrap();
        let expected = b.map(|z| z * linalg::trace(&a));
        prop_assert!(max_abs_diff(&reduced, &expected) <= 1e-12);
    }

    #[test]
    fn embedding_is_a_unital_star_homomorphism(a in 0u32..32, b in 0u32..32, seed: u64) {
        let fam = family();
        let (lo, hi, _) = chain(&fam, a, b, 0);
        let x = element(&fam, &lo, seed);
        let y = element(&fam, &lo, seed ^ 1);
        let ex = embed_observable(&fam, &x, &hi).unwrap();
        let ey = embed_observable(&fam, &y, &hi).unwrap();
        let prod = embed_observable(&fam, &mul(&fam, &x, &y).unwrap(), &hi).unwrap();
        prop_assert!(max_abs_diff(&prod.matrix, &(&ex.matrix * &ey.matrix)) <= 1e-10);
        let star = embed_observable(&fam, &adjoint(&x), &hi).unwrap();
        prop_assert!(max_abs_diff(&star.matrix, &ex.matrix.adjoint()) == 0.0);
        let one = embed_observable(&fam, &AlgebraElement::identity(&fam, lo).unwrap(), &hi).unwrap();
        prop_assert!(max_abs_diff(&one.matrix, &linalg::identity(fam.dim(&hi).unwrap())) == 0.0);
    }

    #[test]
    fn projection_yields_density_operators(a in 0u32..32, b in 0u32..32, rank in 1usize..6, seed: u64) {
        let fam = family();
        let (lo, hi, _) = chain(&fam, a, b, 0);
        let rho = density(&fam, &hi, rank, seed);
        let p = project_state(&fam, &rho, &lo).unwrap();
        prop_assert!(p.validate().is_ok());
        prop_assert!((linalg::trace(p.matrix()) - Complex::new(1.0, 0.0)).norm() <= 1e-12);
        prop_assert!(linalg::hermitian_defect(p.matrix()) <= 1e-14);
        prop_assert!(p.purity() >= 1.0 / p.dim() as f64 - 1e-12);
    }

    #[test]
    fn projection_is_dual_to_embedding(a in 0u32..32, b in 0u32..32, rank in 1usize..6, seed: u64) {
        let fam = family();
        let (lo, hi, _) = chain(&fam, a, b, 0);
        let rho = density(&fam, &hi, rank, seed);
        let x = element(&fam, &lo, seed);
        prop_assert!(duality_check(&fam, &rho, &x).unwrap() <= 1e-10);
    }

    #[test]
    fn maps_compose_along_chains(a in 0u32..32, b in 0u32..32, c in 0u32..32, seed: u64) {
        let fam = family();
        let (lo, mid, hi) = chain(&fam, a, b, c);
        let x = element(&fam, &lo, seed);
        let two = embed_observable(&fam, &embed_observable(&fam, &x, &mid).unwrap(), &hi).unwrap();
        prop_assert!(max_abs_diff(&two.matrix, &embed_observable(&fam, &x, &hi).unwrap().matrix) <= 1e-12);
        let rho = density(&fam, &hi, 3, seed);
        let two = project_state(&fam, &project_state(&fam, &rho, &mid).unwrap(), &lo).unwrap();
        prop_assert!(max_abs_diff(two.matrix(), project_state(&fam, &rho, &lo).unwrap().matrix()) <= 1e-12);
    }

    #[test]
    fn extension_round_trips(a in 0u32..32, b in 0u32..32, seed: u64) {
        let fam = family();
        let (lo, hi, _) = chain(&fam, a, b, 0);
        let rho = density(&fam, &lo, 2, seed);
        let cd = fam.dim(&hi).unwrap() / fam.dim(&lo).unwrap();
        let mut g = projstate::rng::stream(seed, "invariants/filler");
        let filler = DensityOperator::random(lo.clone(), cd, 1, &mut g);
        let ext = extend_state(&fam, &rho, &hi, &filler).unwrap();
        prop_assert!(ext.validate().is_ok());
        let back = project_state(&fam, &ext, &lo).unwrap();
        prop_assert!(max_abs_diff(back.matrix(), rho.matrix()) <= 1e-12);
    }

    #[test]
    fn lattice_triples_are_coherent(a in 0u32..32, b in 0u32..32, c in 0u32..32) {
        let fam = family();
        let t = chain(&fam, a, b, c);
        let rep = check_coherence(&fam, &[t], 1e-12).unwrap();
        prop_assert!(rep.passed);
        prop_assert_eq!(rep.max_diagram_defect, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sheared_measures_factor(shear in -0.8f64..0.8) {
        let spec = GaussianSpec::new(IndexSet::range(0, 3), Variant::Sheared { shear }, 3);
        let model = GaussianModel64::new(spec).unwrap();
        let (lo, hi) = (IndexSet::new(vec![0]), IndexSet::new(vec![0, 2]));
        let rep = verify_measure_product(&model, &lo, &hi, 12, 2).unwrap();
        prop_assert!(rep.max_discrepancy <= 1e-10, "{:?}", rep.identities);
    }
}

#[test]
fn bell_pair_reduces_to_the_maximally_mixed_qubit() {
    let fam = FactorizedFamily64::lattice(IndexSet::range(0, 2), 2).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let psi = [h, 0.0, 0.0, h].map(|x| Complex::new(x, 0.0));
    let rho = DensityOperator::pure(fam.directed().top(), &psi).unwrap();
    for site in 0..2 {
        let l = fam.directed().label(IndexSet::new(vec![site]));
        let r = project_state(&fam, &rho, &l).unwrap();
        assert!(max_abs_diff(r.matrix(), &DensityOperator::maximally_mixed(l, 2).into_matrix()) <= 1e-15);
    }
}
