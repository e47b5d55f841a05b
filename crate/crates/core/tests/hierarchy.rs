use clasmk::experiment::train_model;
use clasmk::hierarchy::{embed_full_many, train_hierarchy, HierarchyHyper, StopReason};
use clasmk::kernel::{KernelSet, KernelSpec};
use clasmk::model_io::{read_model, write_model};
use clasmk::synth::moons;

fn kernels() -> KernelSet {
    KernelSet::new(vec![
        KernelSpec::rbf(1.0).unwrap(),
        KernelSpec::rbf(0.3).unwrap(),
        KernelSpec::polynomial(3).unwrap(),
    ])
    .unwrap()
}

fn hyper(l_max: usize) -> HierarchyHyper {
    HierarchyHyper {
        l_max,
        epsilon: -1.0,
        ..HierarchyHyper::default()
    }
}

#[test]
fn one_layer_budget_gives_one_layer() {
    let ds = moons(60, 0.2, 1);
    let model = train_hierarchy(&ds, &kernels(), &hyper(1)).unwrap();
    assert_eq!(model.n_layers(), 1);
    assert_eq!(model.stop, StopReason::MaxLayers);
    assert!(model.d_nu.is_empty());
}

#[test]
fn zero_budget_is_rejected() {
    let ds = moons(20, 0.2, 1);
    assert!(train_hierarchy(&ds, &kernels(), &hyper(0)).is_err());
}

#[test]
fn zero_confidence_threshold_stops_after_first_layer() {
    let ds = moons(60, 0.2, 2);
    let h = HierarchyHyper {
        t_kappa: 0.0,
        ..hyper(5)
    };
    let model = train_hierarchy(&ds, &kernels(), &h).unwrap();
    assert_eq!(model.n_layers(), 1);
    assert_eq!(model.stop, StopReason::MarginalTooSmall);
}

#[test]
fn deeper_embeddings_extend_shallower_ones() {
    let ds = moons(80, 0.25, 3);
    let h = HierarchyHyper {
        t_kappa: 10.0,
        ..hyper(3)
    };
    let model = train_hierarchy(&ds, &kernels(), &h).unwrap();
    assert!(model.n_layers() >= 2, "{:?}", model.stop);
    let shallow = model.embed(&ds.x, 1).unwrap();
    let deep = model.embed(&ds.x, model.n_layers()).unwrap();
    assert_eq!(deep.ncols(), model.dim_through(model.n_layers()));
    assert_eq!(shallow, deep.columns(0, shallow.ncols()).into_owned());
    assert_eq!(deep, embed_full_many(&ds.x, &model.layers, &model.kernels).unwrap());
    assert_eq!(model.d_nu.len(), model.n_layers() - 1);
}

#[test]
fn training_is_deterministic() {
    let ds = moons(50, 0.2, 4);
    let a = train_hierarchy(&ds, &kernels(), &hyper(2)).unwrap();
    let b = train_hierarchy(&ds, &kernels(), &hyper(2)).unwrap();
    assert_eq!(a.layers[0].nu, b.layers[0].nu);
    assert_eq!(a.delta, b.delta);
}

#[test]
fn model_files_round_trip() {
    let ds = moons(50, 0.2, 5);
    let model = train_model(&ds, &kernels(), &hyper(2), true).unwrap();
    let mut bytes = Vec::new();
    write_model(&model, &mut bytes).unwrap();
    let back = read_model(bytes.as_slice()).unwrap();
    assert_eq!(back.n_layers(), model.n_layers());
    assert_eq!(back.stop, model.stop);
    assert_eq!(back.delta, model.delta);
    let before: Vec<usize> = model.predict(&ds.x).unwrap().iter().map(|p| p.label).collect();
    let after: Vec<usize> = back.predict(&ds.x).unwrap().iter().map(|p| p.label).collect();
    assert_eq!(before, after);
    assert_eq!(model.embed(&ds.x, 1).unwrap(), back.embed(&ds.x, 1).unwrap());
}

#[test]
fn corrupt_model_files_are_rejected() {
    let ds = moons(30, 0.2, 6);
    let model = train_hierarchy(&ds, &kernels(), &hyper(1)).unwrap();
    let mut bytes = Vec::new();
    write_model(&model, &mut bytes).unwrap();
    assert!(read_model(&bytes[..bytes.len() / 2]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(read_model(bad.as_slice()).is_err());
    assert!(read_model(&[][..]).is_err());
}
