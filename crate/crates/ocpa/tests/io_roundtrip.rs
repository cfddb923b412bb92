use ocpa::io::{
    read_trajectory_binary, read_trajectory_csv, write_trajectory_binary, write_trajectory_csv,
    Table,
};
use ocpa_core::noise::SeedSpec;
use ocpa_core::oracle::{simulate_linear_path, SpectralConfig};
use ocpa_core::SpaceTimeGrid;
use serde_json::json;

fn sample() -> ocpa_core::PathSample {
    let grid = SpaceTimeGrid::new(32, 50, 0.05, 0.5).unwrap();
    let cfg = SpectralConfig::new(grid, 3, SeedSpec::new(11, 2)).unwrap();
    simulate_linear_path(&cfg)
}

#[test]
fn binary_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.bin");
    let p = sample();
    write_trajectory_binary(&path, &p).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"OCPA");
    assert_eq!(bytes.len(), 28 + 8 * p.states().len());
    let q = read_trajectory_binary(&path, p.dt(), p.tag()).unwrap();
    assert_eq!(q.states(), p.states());
    assert_eq!(q.dim(), 3);
    assert_eq!(q.n_time(), 50);
    assert_eq!(q.seed().map(|s| s.base_seed), Some(11));
}

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let p = sample();
    write_trajectory_csv(&path, &p).unwrap();
    let q = read_trajectory_csv(&path, "oracle").unwrap();
    assert_eq!(q.states(), p.states());
    assert!((q.dt() - p.dt()).abs() < 1e-15);
}

#[test]
fn truncated_binary_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.bin");
    write_trajectory_binary(&path, &sample()).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
    assert!(read_trajectory_binary(&path, 0.001, "x").is_err());
}

#[test]
fn table_csv_has_metadata_header() {
    let mut t = Table::new("demo", &["a", "b"]).meta("seed = 3");
    t.push(vec![json!(0.1), json!("x,y")]);
    assert_eq!(t.to_csv(), "# seed = 3\na,b\n0.1,\"x,y\"\n");
    assert_eq!(t.to_json()["rows"][0]["a"], json!(0.1));
}
