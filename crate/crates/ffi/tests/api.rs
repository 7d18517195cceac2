use std::ffi::{CStr, CString};
use std::ptr;

use smartsvm_ffi::*;

fn blobs(per_class: usize) -> (Vec<f64>, Vec<i64>) {
    let centers = [(0.0, 0.0), (6.0, 0.0), (0.0, 6.0)];
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (k, (cx, cy)) in centers.iter().enumerate() {
        for i in 0..per_class {
            let t = i as f64;
            x.push(cx + (t * 0.37).sin());
            x.push(cy + (t * 0.91).cos());
            y.push(10 * k as i64 + 7);
        }
    }
    (x, y)
}

fn last_error() -> String {
    let p = sm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn dataset(per_class: usize) -> *mut SmDataset {
    let (x, y) = blobs(per_class);
    let mut ds = ptr::null_mut();
    let status = unsafe { sm_dataset_new(x.as_ptr(), y.len(), 2, y.as_ptr(), &mut ds) };
    assert_eq!(status, SmStatus::Ok);
    ds
}

#[test]
fn dataset_accessors() {
    let ds = dataset(20);
    unsafe {
        assert_eq!(sm_dataset_n_samples(ds), 60);
        assert_eq!(sm_dataset_n_features(ds), 2);
        assert_eq!(sm_dataset_n_classes(ds), 3);
        let mut name = ptr::null_mut();
        assert_eq!(sm_dataset_class_name(ds, 1, &mut name), SmStatus::Ok);
        assert_eq!(CStr::from_ptr(name).to_str().unwrap(), "17");
        sm_string_free(name);
        assert_eq!(sm_dataset_class_name(ds, 3, &mut name), SmStatus::Usage);
        assert!(last_error().contains("out of range"));
        sm_dataset_free(ds);
        assert_eq!(sm_dataset_n_samples(ptr::null()), 0);
    }
}

#[test]
fn null_pointers_are_reported() {
    let mut ds = ptr::null_mut();
    let labels = [0i64];
    let status = unsafe { sm_dataset_new(ptr::null(), 1, 1, labels.as_ptr(), &mut ds) };
    assert_eq!(status, SmStatus::NullPointer);
    assert!(last_error().contains("features"));
    let status = unsafe { sm_model_to_json(ptr::null(), ptr::null_mut()) };
    assert_eq!(status, SmStatus::NullPointer);
    unsafe {
        sm_dataset_free(ptr::null_mut());
        sm_model_free(ptr::null_mut());
        sm_string_free(ptr::null_mut());
    }
}

#[test]
fn non_finite_features_are_data_errors() {
    let x = [0.0, f64::NAN, 1.0, 2.0];
    let y = [0i64, 1];
    let mut ds = ptr::null_mut();
    let status = unsafe { sm_dataset_new(x.as_ptr(), 2, 2, y.as_ptr(), &mut ds) };
    assert_eq!(status, SmStatus::Data);
    assert!(ds.is_null());
}

#[test]
fn ber_estimates() {
    let ds = dataset(30);
    unsafe {
        let mut e = SmBerEstimate::default();
        assert_eq!(sm_pairwise_ber(ds, 0, 1, 3, &mut e), SmStatus::Ok);
        assert_eq!((e.n1, e.n2), (30, 30));
        assert!(e.p_lower <= e.p_hat && e.p_hat <= e.p_upper);

        let mut grid = vec![0.0; 9];
        assert_eq!(sm_pairwise_ber_matrix(ds, 3, grid.as_mut_ptr(), grid.len()), SmStatus::Ok);
        for i in 0..3 {
            assert!(grid[i * 3 + i].is_nan());
            for j in 0..3 {
                if i != j {
                    assert_eq!(grid[i * 3 + j], grid[j * 3 + i]);
                }
            }
        }
        assert_eq!(grid[1], e.p_hat_normalized);
        assert_eq!(sm_pairwise_ber_matrix(ds, 3, grid.as_mut_ptr(), 8), SmStatus::Usage);

        let mut ovr = [SmBerEstimate::default(); 3];
        assert_eq!(sm_ovr_ber(ds, 3, ovr.as_mut_ptr(), 3), SmStatus::Ok);
        assert_eq!(ovr.iter().map(|e| e.n1 + e.n2).collect::<Vec<_>>(), vec![90; 3]);
        assert_eq!(sm_pairwise_ber(ds, 0, 5, 3, &mut e), SmStatus::Usage);
        sm_dataset_free(ds);
    }
}

#[test]
fn train_predict_round_trip() {
    let ds = dataset(30);
    let (x, y) = blobs(30);
    for strategy in [SmStrategy::SmartSvm, SmStrategy::Ovo, SmStrategy::Ovr] {
        unsafe {
            let mut cfg = std::mem::zeroed::<SmTrainConfig>();
            sm_train_config_default(&mut cfg);
            assert_eq!(cfg.n_trees, 3);
            cfg.strategy = strategy;
            cfg.cv_folds = 3;
            let mut model = ptr::null_mut();
            assert_eq!(sm_model_train(ds, &cfg, &mut model), SmStatus::Ok, "{}", last_error());
            assert_eq!(sm_model_n_classes(model), 3);
            let expected_models = if strategy == SmStrategy::SmartSvm { 2 } else { 3 };
            assert_eq!(sm_model_n_binary(model), expected_models);

            let mut pred = vec![usize::MAX; y.len()];
            assert_eq!(sm_model_predict(model, x.as_ptr(), y.len(), 2, pred.as_mut_ptr()), SmStatus::Ok);
            let truth: Vec<usize> = (0..3).flat_map(|k| std::iter::repeat_n(k, 30)).collect();
            let mut ari = 0.0;
            assert_eq!(
                sm_adjusted_rand_index(truth.as_ptr(), pred.as_ptr(), truth.len(), &mut ari),
                SmStatus::Ok
            );
            assert!(ari > 0.95, "ari {ari}");

            assert_eq!(sm_model_predict(model, x.as_ptr(), 30, 3, pred.as_mut_ptr()), SmStatus::Data);

            let mut json = ptr::null_mut();
            assert_eq!(sm_model_to_json(model, &mut json), SmStatus::Ok);
            let mut copy = ptr::null_mut();
            assert_eq!(sm_model_from_json(json, &mut copy), SmStatus::Ok);
            let mut pred2 = vec![0usize; y.len()];
            assert_eq!(sm_model_predict(copy, x.as_ptr(), y.len(), 2, pred2.as_mut_ptr()), SmStatus::Ok);
            assert_eq!(pred, pred2);

            let mut name = ptr::null_mut();
            assert_eq!(sm_model_class_name(copy, 2, &mut name), SmStatus::Ok);
            assert_eq!(CStr::from_ptr(name).to_str().unwrap(), "27");
            sm_string_free(name);
            sm_string_free(json);
            sm_model_free(copy);
            sm_model_free(model);
        }
    }
    unsafe { sm_dataset_free(ds) };
}

#[test]
fn bad_json_is_rejected() {
    let json = CString::new("{\"version\":\"nope\"}").unwrap();
    let mut model = ptr::null_mut();
    let status = unsafe { sm_model_from_json(json.as_ptr(), &mut model) };
    assert_ne!(status, SmStatus::Ok);
    assert!(model.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn csv_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "a,b,cls\n0,0,x\n1,1,y\n0,1,x\n").unwrap();
    let path = CString::new(path.to_str().unwrap()).unwrap();
    let label = CString::new("cls").unwrap();
    let mut ds = ptr::null_mut();
    unsafe {
        assert_eq!(sm_dataset_load_csv(path.as_ptr(), label.as_ptr(), &mut ds), SmStatus::Ok);
        assert_eq!(sm_dataset_n_samples(ds), 3);
        assert_eq!(sm_dataset_n_classes(ds), 2);
        sm_dataset_free(ds);
        let missing = CString::new("/nonexistent/file.csv").unwrap();
        let mut other = ptr::null_mut();
        assert_ne!(sm_dataset_load_csv(missing.as_ptr(), ptr::null(), &mut other), SmStatus::Ok);
    }
}
