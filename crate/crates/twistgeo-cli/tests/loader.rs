//! Loading and validation of `.geo` specs.

use std::path::Path;

use twistgeo::algebra::AlgebraKind;
use twistgeo_cli::expr::Pos;
use twistgeo_cli::geofile::{load_geometry, load_geometry_str};

fn shipped(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../geometries").join(format!("{name}.geo"));
    std::fs::read_to_string(path).unwrap()
}

fn error_of(src: &str) -> String {
    load_geometry_str(src).unwrap_err().to_string()
}

#[test]
fn shipped_geometries_load() {
    let plane = load_geometry_str(&shipped("moyal_plane")).unwrap();
    assert_eq!((plane.name.as_str(), plane.order), ("moyal_plane", 2));
    assert_eq!(plane.geometry.alg().kind(), AlgebraKind::Polynomial);
    assert!(plane.geometry.is_invariant());
    let torus = load_geometry_str(&shipped("nc_torus")).unwrap();
    assert_eq!(torus.geometry.alg().kind(), AlgebraKind::Torus);
    let perturbed = load_geometry_str(&shipped("moyal_perturbed")).unwrap();
    assert_eq!(perturbed.order, 1);
    let classical = load_geometry_str(&shipped("classical")).unwrap();
    assert!(classical.geometry.alg().twist_spec().pairs.is_empty());
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/twisted_frame.geo");
    assert!(!load_geometry(&fixture).unwrap().geometry.is_invariant());
}

#[test]
fn non_symmetric_metric_is_rejected() {
    let src = shipped("moyal_plane").replace("g[2,2] = 1", "g[2,2] = 1\ng[1,2] = 1");
    assert!(error_of(&src).contains("metric not braided symmetric: g ≠ τ(g)"), "{}", error_of(&src));
}

#[test]
fn degenerate_frame_fails_the_dual_basis_check() {
    let src = shipped("moyal_plane").replace("e[2](x[2]) = 1", "e[2](x[1]) = 1");
    assert!(error_of(&src).contains("dual basis"), "{}", error_of(&src));
    let src = shipped("moyal_plane").replace("e[2](x[2]) = 1", "e[2](x[2]) = 0");
    assert!(error_of(&src).contains("dual basis"), "{}", error_of(&src));
}

#[test]
fn wrong_declared_frame_action_is_rejected() {
    let src = shipped("moyal_plane").replace("e[2](x[2]) = 1", "e[2](x[2]) = 1\nZ[1] |> e[1] = e[2]");
    assert!(error_of(&src).contains("Z[1] |> e[1]"), "{}", error_of(&src));
}

#[test]
fn missing_sections_and_keys() {
    let src = shipped("moyal_plane");
    let without_metric = &src[..src.find("[metric]").unwrap()];
    assert_eq!(error_of(without_metric), "missing section [metric]");
    assert_eq!(error_of(&src.replace("order = 2\n", "")), "[geometry] is missing `order`");
    assert!(error_of(&format!("{src}\n[extra]\n")).contains("unknown section [extra]"));
}

#[test]
fn expression_errors_carry_file_positions() {
    let src = shipped("moyal_perturbed").replace("g[1,1] = 1 + h*x1", "g[1,1] = 1 + h*x3");
    let err = load_geometry_str(&src).unwrap_err();
    let line = src.lines().position(|l| l.starts_with("g[1,1]")).unwrap() + 1;
    assert_eq!(err.pos, Some(Pos { line, col: 16 }));
    assert!(err.message.contains("unknown generator"));
}

#[test]
fn positive_order_warnings_are_collected() {
    let src = shipped("moyal_perturbed").replace("g[1,1] = 1 + h*x1", "g[1,1] = 1 + h*x1 + h^3");
    let spec = load_geometry_str(&src).unwrap();
    assert_eq!(spec.warnings.len(), 1);
}

#[test]
fn g0_inverse_is_verified() {
    let src = shipped("moyal_plane").replace("g0_inverse = [[1, 0], [0, 1]]", "g0_inverse = [[1, 0], [0, 2]]");
    assert!(error_of(&src).contains("g0_inverse"));
    let src = shipped("moyal_plane").replace("g[2,2] = 1", "g[2,2] = 2").replace("[[1, 0], [0, 1]]", "[[1, 0], [0, 1/2]]");
    assert!(load_geometry_str(&src).is_ok());
}

#[test]
fn nonconstant_order_zero_metric_is_rejected() {
    let src = shipped("moyal_plane").replace("g[1,1] = 1", "g[1,1] = 1 + x1");
    assert!(error_of(&src).contains("order-0 metric entries must be constant"));
}

#[test]
fn torus_derivations_must_be_diagonal() {
    let src = shipped("nc_torus").replace("e[2](U[0,1]) = i*U[0,1]", "e[2](U[0,1]) = i*U[1,1]");
    assert!(error_of(&src).contains("constant multiple"), "{}", error_of(&src));
}

#[test]
fn spec_hash_tracks_source_bytes() {
    let a = load_geometry_str(&shipped("moyal_plane")).unwrap();
    let b = load_geometry_str(&format!("{}\n# trailing comment\n", shipped("moyal_plane"))).unwrap();
    assert_eq!(a.sha256.len(), 64);
    assert_ne!(a.sha256, b.sha256);
}
