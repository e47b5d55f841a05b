//! Worked examples with hand-computed or brute-force expected values.

use nalgebra::DMatrix;

use clasmk::bounds::{
    between_distance_lower_bound, bound_lemma1, bound_theorem1, bound_theorem2, empirical_separation,
    estimate_model_stats, SubspaceProjections,
};
use clasmk::classifier::{fit_lssvm, predict, select_marginal, LinearModel, Prediction};
use clasmk::data::{kfold, parse_dataset, split_stratified, DataFormat, Dataset};
use clasmk::kernel::{eval_kernel, feature_distance_sq, gram, KernelSpec};
use clasmk::metric::{select_best_kernels, threshold_weights, WeightMatrix};
use clasmk::subspace::{fit_class_basis, subspace_overlap, BasisOptions};
use clasmk::synth::{synth_subspace, SubspaceParams};
use clasmk::Error;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn weights(rows: &[&[f64]]) -> WeightMatrix {
    let k = rows[0].len();
    WeightMatrix::from_matrix(DMatrix::from_fn(rows.len(), k, |r, c| rows[r][c])).unwrap()
}

#[test]
fn kernel_values() {
    let rbf = KernelSpec::rbf(1.0).unwrap();
    assert_eq!(eval_kernel(&rbf, &[3.2, -1.0], &[3.2, -1.0]).unwrap(), 1.0);
    assert!(eval_kernel(&rbf, &[0.0], &[40.0]).unwrap() < 1e-300);
    let poly = KernelSpec::polynomial(2).unwrap();
    assert!(close(eval_kernel(&poly, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.25, 1e-15));
    assert!(eval_kernel(&rbf, &[1.0], &[1.0, 2.0]).is_err());
    assert!(eval_kernel(&rbf, &[f64::NAN], &[1.0]).is_err());
}

#[test]
fn gram_of_one_point_is_one() {
    let x = DMatrix::from_row_slice(1, 2, &[0.3, -0.7]);
    for spec in [KernelSpec::rbf(0.5).unwrap(), KernelSpec::polynomial(7).unwrap()] {
        assert_eq!(gram(&spec, &x, &x).unwrap()[(0, 0)], 1.0);
    }
}

#[test]
fn distances_from_kernel_values() {
    assert_eq!(feature_distance_sq(1.0, 1.0, 1.0), 0.0);
    assert_eq!(feature_distance_sq(1.0, 1.0, 0.0), 2.0);
    assert_eq!(feature_distance_sq(1.0, 1.0, 0.5), 1.0);
    assert_eq!(feature_distance_sq(1.0, 1.0, 1.0 + 1e-13), 0.0);
}

#[test]
fn basis_of_a_single_point() {
    let x = DMatrix::from_row_slice(1, 2, &[0.5, 2.0]);
    let spec = KernelSpec::rbf(0.7).unwrap();
    let b = fit_class_basis(0, 0, &x, &spec, &BasisOptions::default()).unwrap();
    assert_eq!(b.rank(), 1);
    assert!(close(b.transform[(0, 0)], 1.0, 1e-12));
    assert!(close(b.project(&spec, &[0.5, 2.0]).unwrap()[0], 1.0, 1e-12));
}

#[test]
fn linear_kernel_on_collinear_points_needs_two_landmarks() {
    let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]);
    let spec = KernelSpec::polynomial(1).unwrap();
    let opts = BasisOptions {
        tol: 1e-6,
        ..BasisOptions::default()
    };
    let b = fit_class_basis(0, 0, &x, &spec, &opts).unwrap();
    assert_eq!(b.rank(), 2);
}

#[test]
fn far_points_project_to_zero() {
    let x = DMatrix::from_row_slice(2, 1, &[0.0, 0.3]);
    let spec = KernelSpec::rbf(0.1).unwrap();
    let b = fit_class_basis(0, 0, &x, &spec, &BasisOptions::default()).unwrap();
    let p = b.project(&spec, &[100.0]).unwrap();
    assert!(p.iter().all(|v| *v == 0.0));
}

#[test]
fn overlap_of_a_basis_with_itself_is_identity() {
    let x = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let kernels = clasmk::kernel::KernelSet::new(vec![KernelSpec::rbf(1.0).unwrap()]).unwrap();
    let b = fit_class_basis(0, 0, &x, kernels.get(0).unwrap(), &BasisOptions::default()).unwrap();
    let q = subspace_overlap(&b, &b, &kernels).unwrap();
    assert!((q - DMatrix::identity(b.rank(), b.rank())).abs().max() < 1e-6);
    let other = fit_class_basis(1, 0, &(x.clone() * 1e4), kernels.get(0).unwrap(), &BasisOptions::default()).unwrap();
    let mut shifted = other.clone();
    shifted.kernel_index = 1;
    assert!(matches!(subspace_overlap(&b, &shifted, &kernels), Err(Error::KernelMismatch(..))));
}

#[test]
fn threshold_examples() {
    let nu = weights(&[&[0.7, 0.29, 0.01]]);
    let t = threshold_weights(&nu, 0.1);
    assert!(close(t.get(0, 0), 0.7 / 0.99, 1e-12));
    assert!(close(t.get(0, 1), 0.29 / 0.99, 1e-12));
    assert_eq!(t.get(0, 2), 0.0);
    assert_eq!(threshold_weights(&nu, 0.0), nu);
    let hot = weights(&[&[1.0, 0.0, 0.0]]);
    assert_eq!(threshold_weights(&hot, 0.9), hot);
}

#[test]
fn best_kernel_examples() {
    assert_eq!(select_best_kernels(&weights(&[&[0.2, 0.5, 0.3]])), vec![1]);
    assert_eq!(select_best_kernels(&weights(&[&[0.5, 0.5]])), vec![0]);
    assert_eq!(select_best_kernels(&weights(&[&[0.25; 4]])), vec![0]);
}

#[test]
fn bound_examples() {
    assert_eq!(bound_lemma1(0.0, 0.0, 1.0).unwrap().value, 0.0);
    assert!(close(bound_lemma1(0.25, 0.1, 0.8).unwrap().value, 0.2 / 0.55, 1e-12));
    assert!(close(bound_lemma1(0.0, 0.3, 0.6).unwrap().value, 0.4, 1e-12));
    assert!(matches!(bound_lemma1(1.0, 0.0, 0.5), Err(Error::HypothesisViolated(_))));

    let b = bound_theorem1(0.04, 0.0, &[0.3, 0.7], &[0.9, 0.6]).unwrap();
    assert!(close(b.value, 0.3875, 1e-12));
    let eq = bound_theorem1(0.25, 0.1, &[0.5, 0.5], &[0.8, 0.8]).unwrap();
    assert_eq!(eq.value, bound_lemma1(0.25, 0.1, 0.8).unwrap().value);
    let degenerate = bound_theorem1(0.25, 0.1, &[1.0, 0.0], &[0.8, 0.1]).unwrap();
    assert!(close(degenerate.value, bound_lemma1(0.25, 0.1, 0.8).unwrap().value, 1e-15));

    let vac = bound_lemma1(0.81, 0.0, 0.0).unwrap();
    assert!(vac.vacuous && vac.value > 1.0);
}

#[test]
fn class_specific_examples() {
    assert!(close(between_distance_lower_bound(0.1, 0.2, 2), 2.24, 1e-12));
    let m = DMatrix::from_element(2, 2, 1.0);
    assert_eq!(bound_theorem2(0.0, 0.0, &m).unwrap().bound.value, 0.0);
    assert!(bound_theorem2(0.3, 0.0, &DMatrix::from_element(1, 1, 0.5)).is_err());
}

#[test]
fn separation_examples() {
    let emb = DMatrix::from_row_slice(4, 1, &[0.0, 0.0, 1.0, 1.0]);
    let sep = empirical_separation(&emb, &[0, 0, 1, 1], 2).unwrap();
    assert_eq!(sep.expected_within, 0.0);
    assert_eq!(sep.prob, 0.0);
    let same = DMatrix::from_element(4, 2, 0.5);
    assert!(empirical_separation(&same, &[0, 0, 1, 1], 2).is_err());
}

#[test]
fn stats_of_orthogonal_subspaces() {
    let sample = synth_subspace(&SubspaceParams {
        n_classes: 2,
        rank: 2,
        ambient_dim: 6,
        sigma_e_sq: 0.0,
        overlap_lambda: 0.0,
        n_per_class: 300,
        seed: 2,
    })
    .unwrap();
    let proj = SubspaceProjections::from_features(&sample.data.per_class(), &sample.bases).unwrap();
    let stats = estimate_model_stats(&proj).unwrap();
    assert!(stats.lambda_hat < 1e-12);
    assert!(stats.sigma_e_sq < 2.0 / (600f64).sqrt());
    assert_eq!(stats.priors, vec![0.5, 0.5]);
}

#[test]
fn sample_overlap_matches_construction() {
    let sample = synth_subspace(&SubspaceParams {
        n_classes: 2,
        rank: 3,
        ambient_dim: 12,
        sigma_e_sq: 0.1,
        overlap_lambda: 0.25,
        n_per_class: 5000,
        seed: 3,
    })
    .unwrap();
    let proj = SubspaceProjections::from_features(&sample.data.per_class(), &sample.bases).unwrap();
    let stats = estimate_model_stats(&proj).unwrap();
    assert!(close(stats.lambda_hat, 0.25, 0.05), "{}", stats.lambda_hat);
}

#[test]
fn confidence_and_marginal_examples() {
    let p = Prediction::from_scores(vec![2.0, -1.0, -3.0]);
    assert_eq!((p.label, p.confidence), (0, 1.5));
    let tie = Prediction::from_scores(vec![0.4, 0.4]);
    assert_eq!((tie.label, tie.confidence), (0, 0.0));
    let model = LinearModel {
        w: DMatrix::zeros(3, 2),
        b: nalgebra::DVector::from_vec(vec![1.0, 0.0]),
        ridge: 1.0,
    };
    assert_eq!(predict(&model, &[5.0, -2.0, 7.0]).unwrap().label, 0);

    let preds: Vec<Prediction> = [0.5, 1.0, 1.5]
        .iter()
        .map(|&k| Prediction::from_scores(vec![k, -k]))
        .collect();
    assert_eq!(select_marginal(&preds, 1.0), vec![0, 1]);
}

#[test]
fn two_points_are_split_at_zero() {
    let f = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
    let m = fit_lssvm(&f, &[0, 1], 2, 1e-9).unwrap();
    assert_eq!(predict(&m, &[-1.0]).unwrap().label, 0);
    assert_eq!(predict(&m, &[1.0]).unwrap().label, 1);
    assert_eq!(predict(&m, &[-1e-3]).unwrap().label, 0);
    assert_eq!(predict(&m, &[1e-3]).unwrap().label, 1);
    assert!(fit_lssvm(&f, &[1, 1], 2, 1e-3).is_err());
}

#[test]
fn csv_and_libsvm_parsing() {
    let ds = parse_dataset("1,0.5,2.0\n2,1.5,3.0", DataFormat::Csv).unwrap();
    assert_eq!((ds.len(), ds.dim(), ds.n_classes()), (2, 2, 2));
    assert_eq!(ds.y, vec![0, 1]);
    let sparse = parse_dataset("+1 1:0.5\n-1 2:1.0\n", DataFormat::Libsvm).unwrap();
    assert_eq!(sparse.row(0), vec![0.5, 0.0]);
    assert_eq!(sparse.row(1), vec![0.0, 1.0]);
    assert!(parse_dataset("", DataFormat::Csv).is_err());
}

fn balanced(per_class: &[usize]) -> Dataset {
    let y: Vec<usize> = per_class.iter().enumerate().flat_map(|(c, &n)| vec![c; n]).collect();
    let x = DMatrix::from_fn(y.len(), 1, |i, _| i as f64);
    Dataset::new(x, y, per_class.len()).unwrap()
}

#[test]
fn split_examples() {
    let ds = balanced(&[10, 10]);
    let (a, b) = split_stratified(&ds, 0.5, 1).unwrap();
    assert_eq!((a.class_counts(), b.class_counts()), (vec![5, 5], vec![5, 5]));
    let again = split_stratified(&ds, 0.5, 1).unwrap();
    assert_eq!(a.x, again.0.x);
    let (a, b) = split_stratified(&balanced(&[3]), 0.9, 0).unwrap();
    assert_eq!((a.len(), b.len()), (2, 1));
    assert!(split_stratified(&balanced(&[1, 4]), 0.5, 0).is_err());
}

#[test]
fn kfold_examples() {
    for (fold_train, fold_test) in kfold(&balanced(&[2, 2]), 2, 0).unwrap() {
        assert_eq!((fold_train.len(), fold_test.len()), (2, 2));
    }
    let folds = kfold(&balanced(&[50, 50]), 10, 3).unwrap();
    let mut seen = vec![0; 100];
    for (_, test) in &folds {
        assert_eq!(test.len(), 10);
        for &i in test {
            seen[i] += 1;
        }
    }
    assert!(seen.iter().all(|&n| n == 1));
    assert!(kfold(&balanced(&[5, 2]), 3, 0).is_err());
}
