use refprior_core::hierarchy::{sequential_reference, BlockOrdering, HierarchyOptions};
use refprior_core::models::two_piece::twopiece_proper_prior_value;
use refprior_core::models::{GaussianLocationScale, TwoPiece};
use refprior_core::{AlphaParams, Error, GridDensity};

fn alpha() -> AlphaParams {
    AlphaParams::new(0.5).unwrap()
}

fn compare(result: &GridDensity, f: impl Fn(&[f64]) -> f64) -> f64 {
    let g = result.grid();
    let reference =
        GridDensity::from_values(result.space().clone(), g.clone(), (0..g.len()).map(|i| f(&g.node(i))).collect())
            .unwrap();
    result.class_log_distance(&reference).unwrap()
}

#[test]
fn independent_blocks_give_the_product_of_marginal_jeffreys() {
    let m = GaussianLocationScale::new();
    let ord = BlockOrdering::new(vec![1], vec![0], 2).unwrap();
    let bx = [(-1.0, 1.0), (0.5, 3.0)];
    let r = sequential_reference(&m, &ord, alpha(), &bx, HierarchyOptions::default(), None).unwrap();
    // μ-model after integrating σ out is a location family: flat Jeffreys in μ
    assert!(compare(&r.density, |t| 1.0 / t[1]) < 0.02);
    assert!((r.density.integral() - 1.0).abs() < 1e-6);
}

#[test]
fn two_piece_scales_first_gives_the_half_prior() {
    let m = TwoPiece::new();
    let ord = BlockOrdering::new(vec![1, 2], vec![0], 3).unwrap();
    let bx = [(-1.0, 1.0), (0.5, 2.0), (0.5, 2.0)];
    let r = sequential_reference(&m, &ord, alpha(), &bx, HierarchyOptions::default(), None).unwrap();
    assert!(compare(&r.density, |t| twopiece_proper_prior_value(0.5, t)) < 0.05);
    assert!((r.density.integral() - 1.0).abs() < 1e-6);
}

#[test]
fn unbounded_box_must_be_compactified() {
    let m = GaussianLocationScale::new();
    let ord = BlockOrdering::new(vec![1], vec![0], 2).unwrap();
    let bx = [(-1.0, 1.0), (0.5, f64::INFINITY)];
    let err = sequential_reference(&m, &ord, alpha(), &bx, HierarchyOptions::default(), None).unwrap_err();
    assert!(matches!(err, Error::CompactifyFirst(_)), "{err}");
}
