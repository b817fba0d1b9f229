mod common;

use common::*;
use etrecon::adsir::{adsir, adsir_image_step, adsir_objective, encode_patches, AdsirConfig, PatchPrior};
use etrecon::geometry::ea_angles;
use etrecon::sart::{os_sart, os_sart_step, partition_views, Constraints, SartConfig};
use etrecon::sparse::{extract_patches, Dictionary, ErrorBound};
use etrecon::{Detector, GridSpec, ImageGrid, Projector, Sinogram};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn random_instance(seed: u64, views: usize) -> (GridSpec, Projector, DMatrix<f64>, Vec<f64>, Sinogram) {
    let mut r = rng(seed);
    let g = GridSpec::square(8, 1.0).unwrap();
    let a = random_angles(views, &mut r);
    let det = Detector::covering(&g);
    let p = Projector::new(g, &a, det);
    let w = dense_system(&g, &a, &det);
    let f: Vec<f64> = (0..g.len()).map(|_| r.random_range(0.0..5.0)).collect();
    let s: Vec<f64> = (0..p.n_rays()).map(|_| r.random_range(0.0..20.0)).collect();
    let sino = Sinogram::from_vec(a, det, s).unwrap();
    (g, p, w, f, sino)
}

#[test]
fn sart_step_matches_dense_transcription() {
    for seed in 0..5 {
        let (g, p, w, f, sino) = random_instance(seed, 4);
        let subset = [1usize, 3];
        let rows = subset_rows(&subset, sino.n_bins());
        let want = dense_sart_step(&w, &DVector::from_vec(f.clone()), &DVector::from_column_slice(sino.values()), &rows);
        let mut img = ImageGrid::from_vec(g, f).unwrap();
        os_sart_step(&mut img, &sino, &p, &subset, p.ray_sums(), &p.pixel_sums(&subset)).unwrap();
        assert!(max_rel_diff(img.values(), want.as_slice()) <= 1e-10);
    }
}

fn random_dictionary(dim: usize, k: usize, r: &mut impl Rng) -> Dictionary {
    Dictionary::normalized(dim, (0..dim * k).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn adsir_step_matches_dense_transcription() {
    for seed in 0..5 {
        let (g, p, w, f, sino) = random_instance(100 + seed, 2);
        let mut r = rng(seed);
        let dict = random_dictionary(16, 24, &mut r);
        let img = ImageGrid::from_vec(g, f.clone()).unwrap();
        // codes of a perturbed image so the patch residual is nonzero
        let other: Vec<f64> = f.iter().map(|v| v + r.random_range(-1.0..1.0)).collect();
        let codes = encode_patches(
            &extract_patches(&ImageGrid::from_vec(g, other).unwrap(), 4).unwrap(),
            &dict,
            3,
            ErrorBound::Absolute(0.0),
        )
        .unwrap();
        let lambda = 0.37;
        let subset = [1usize];
        let e = extraction_matrices(&g, 4);
        let dd = dense_dictionary(&dict);
        let alpha: Vec<DVector<f64>> = codes.iter().map(|c| dense_code(c, 24)).collect();
        let want = dense_adsir_step(
            &w,
            &DVector::from_vec(f.clone()),
            &DVector::from_column_slice(sino.values()),
            &subset_rows(&subset, sino.n_bins()),
            &e,
            &dd,
            &alpha,
            lambda,
        );
        let prior = PatchPrior::new(&codes, &dict, g, 4).unwrap();
        let mut got = img.clone();
        adsir_image_step(&mut got, &sino, &p, &subset, &p.weighted_pixel_sums(&subset), &prior, lambda).unwrap();
        assert!(max_rel_diff(got.values(), want.as_slice()) <= 1e-10, "seed {seed}");

        let obj = adsir_objective(&p, &img, &sino, &dict, &codes, lambda).unwrap();
        let dense = dense_objective(
            &w,
            &DVector::from_vec(f),
            &DVector::from_column_slice(sino.values()),
            &e,
            &dd,
            &alpha,
            lambda,
        );
        assert!((obj.total - dense).abs() <= 1e-10 * dense);
        assert!(obj.nonzeros <= 3 * codes.len());
    }
}

#[test]
fn adsir_step_without_prior_is_weighted_residual_step() {
    let (g, p, w, f, sino) = random_instance(7, 3);
    let dict = random_dictionary(16, 20, &mut rng(1));
    let codes = encode_patches(&extract_patches(&ImageGrid::from_vec(g, f.clone()).unwrap(), 4).unwrap(), &dict, 2, ErrorBound::Absolute(0.0)).unwrap();
    let prior = PatchPrior::new(&codes, &dict, g, 4).unwrap();
    let subset = [0usize, 2];
    let mut got = ImageGrid::from_vec(g, f.clone()).unwrap();
    adsir_image_step(&mut got, &sino, &p, &subset, &p.weighted_pixel_sums(&subset), &prior, 0.0).unwrap();
    let rows = subset_rows(&subset, sino.n_bins());
    let fv = DVector::from_vec(f);
    let pv = DVector::from_column_slice(sino.values());
    for j in 0..g.len() {
        let num: f64 = rows.iter().map(|&i| w[(i, j)] * ((w.row(i) * &fv)[0] - pv[i])).sum();
        let den: f64 = rows.iter().map(|&i| w[(i, j)] * w.row(i).sum()).sum();
        let want = if den > 0.0 { fv[j] - num / den } else { fv[j] };
        assert!((got.values()[j] - want).abs() <= 1e-10 * want.abs().max(1.0));
    }
}

#[test]
fn sart_converges_on_consistent_2x2_system() {
    let g = GridSpec::square(2, 1.0).unwrap();
    // off-axis angles keep rays away from pixel edges
    let a = angle_set(&[-50.0, -10.0, 20.0, 65.0]);
    let det = Detector::covering(&g);
    let p = Projector::new(g, &a, det);
    let w = dense_system(&g, &a, &det);
    let truth = [3.0, 1.0, 4.0, 1.5];
    let sino = p.forward(&ImageGrid::from_vec(g, truth.to_vec()).unwrap()).unwrap();

    // direct least-squares solve of W f = p
    let pv = DVector::from_column_slice(sino.values());
    let solved = (w.transpose() * &w).lu().solve(&(w.transpose() * pv)).unwrap();
    assert!(max_rel_diff(solved.as_slice(), &truth) < 1e-10);

    let cfg = SartConfig::sweeps(500, 4, Constraints::none());
    let out = os_sart(&p, &ImageGrid::zeros(g), &sino, &cfg, None).unwrap();
    let rmse = (out
        .image
        .values()
        .iter()
        .zip(solved.iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / 4.0)
        .sqrt();
    assert!(rmse <= 1e-6 * 4.0, "rmse {rmse}");
}

#[test]
fn partitions_follow_modulo_rule() {
    let p = partition_views(5, 2).unwrap();
    assert_eq!(p.subsets(), &[vec![0, 2, 4], vec![1, 3]]);
    assert!(partition_views(3, 0).is_err());
    assert!(partition_views(3, 4).is_err());
}

fn small_problem() -> (ImageGrid, Projector, Sinogram) {
    let truth = etrecon::phantom::seeded_phantom(32, 1.0, 5).unwrap();
    let g = truth.spec();
    let a = ea_angles(24, -89.0, 90.0).unwrap();
    let p = Projector::new(g, &a, Detector::covering(&g));
    let sino = p.forward(&truth).unwrap();
    (truth, p, sino)
}

fn small_config(g: &GridSpec, views: usize) -> AdsirConfig {
    let mut c = AdsirConfig::standard(views, g);
    c.patch_edge = 6;
    c.n_atoms = 64;
    c.sparsity = 4;
    c.iterations = 20;
    c.init_sart_iterations = 5 * views;
    c
}

#[test]
fn adsir_protocol_retrains_ten_times_and_is_deterministic() {
    let (truth, p, sino) = small_problem();
    let g = truth.spec();
    let mut c = small_config(&g, p.n_views());
    c.iterations = 100;
    c.patch_edge = 4;
    c.n_atoms = 32;
    c.sparsity = 2;
    c.init_sart_iterations = p.n_views();
    let a = adsir(&p, &ImageGrid::zeros(g), &sino, &c, Some(&truth)).unwrap();
    assert_eq!(a.retrain_events, 10);
    assert_eq!(a.trace.len(), 101);
    let b = adsir(&p, &ImageGrid::zeros(g), &sino, &c, Some(&truth)).unwrap();
    assert_eq!(a.image, b.image);
    assert_eq!(a.trace, b.trace);
}

#[test]
fn adsir_improves_warm_start_on_consistent_data() {
    let (truth, p, sino) = small_problem();
    let g = truth.spec();
    let c = small_config(&g, p.n_views());
    let out = adsir(&p, &ImageGrid::zeros(g), &sino, &c, Some(&truth)).unwrap();
    let first = out.trace[0].rmse.unwrap();
    let last = out.trace.last().unwrap().rmse.unwrap();
    assert!(last < first, "{first} -> {last}");
    assert_eq!(out.objective_increases, 0);
    // sparsity contract on the final codes
    let codes = encode_patches(&extract_patches(&out.image, 6).unwrap(), &out.dictionary, 4, c.epsilon).unwrap();
    assert!(codes.iter().all(|c| c.nnz() <= 4));
}

#[test]
fn vanishing_prior_tracks_os_sart() {
    let (truth, p, sino) = small_problem();
    let g = truth.spec();
    let views = p.n_views();
    let mut c = small_config(&g, views);
    c.lambda = 1e-9;
    c.retrain = false;
    c.iterations = 150;
    c.constraints = Constraints::none();
    let warm = c.init_sart_iterations;
    let a = adsir(&p, &ImageGrid::zeros(g), &sino, &c, None).unwrap();

    let cfg = SartConfig {
        iterations: warm + 150 * views,
        ..SartConfig::sweeps(1, views, Constraints::none())
    };
    let s = os_sart(&p, &ImageGrid::zeros(g), &sino, &cfg, None).unwrap();
    let diff = etrecon::metrics::rmse(&a.image, &s.image).unwrap();
    let scale = (s.image.values().iter().map(|v| v * v).sum::<f64>() / g.len() as f64).sqrt();
    assert!(diff <= 0.01 * scale, "relative gap {}", diff / scale);
    // both approach the phantom on full-range data
    let err = etrecon::metrics::rmse(&a.image, &truth).unwrap();
    assert!(err <= 0.05 * truth.max(), "{err}");
}
