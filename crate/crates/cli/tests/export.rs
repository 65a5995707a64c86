use std::fs;

use num_complex::Complex64;
use proptest::prelude::*;
use tempfile::TempDir;

use qwalk_cli::io::{export_complex_series, export_series, parse_edge_list, parse_graph_json};
use qwalk_cli::CliError;

fn parse_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn empty_series_is_header_only() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("s.csv");
    export_series(&[], &[], &p).unwrap();
    assert_eq!(fs::read_to_string(&p).unwrap(), "t,value\n");
    export_complex_series(&[], &[], &p).unwrap();
    assert_eq!(fs::read_to_string(&p).unwrap(), "t,re,im\n");
}

#[test]
fn one_point_is_two_lines() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("s.csv");
    export_series(&[1.0], &[0.25], &p).unwrap();
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(text, "t,value\n1.0000000000000000e0,2.5000000000000000e-1\n");
    assert!(!text.contains('\r'));
}

#[test]
fn length_mismatch_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let err = export_series(&[1.0, 2.0], &[0.5], &dir.path().join("s.csv")).unwrap_err();
    assert!(matches!(err, CliError::Input(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn unwritable_path_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let err = export_series(&[1.0], &[1.0], &dir.path().join("no/such/dir/s.csv")).unwrap_err();
    assert!(matches!(err, CliError::Io { .. }));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn core_errors_map_to_exit_codes() {
    use qwalk_core::Error;
    let code = |e: Error| CliError::from(e).exit_code();
    assert_eq!(code(Error::Accuracy { requested: 1e-12, achieved: 1e-6 }), 3);
    assert_eq!(code(Error::Consistency("x".into())), 3);
    assert_eq!(code(Error::Domain("x".into())), 2);
    assert_eq!(code(Error::NoPath { from: 0, to: 1 }), 2);
    assert_eq!(code(Error::CountOverflow), 2);
    assert_eq!(CliError::Violation("x".into()).exit_code(), 1);
}

#[test]
fn graph_json_phases_and_weights() {
    let f = parse_graph_json(
        r#"{"n": 3, "edges": [{"u": 0, "v": 1, "w": [2.0, 0.0], "theta": 0.5}, {"u": 1, "v": 2}]}"#,
    )
    .unwrap();
    assert!(!f.graph.is_directed());
    assert_eq!(f.graph.weight(1, 0), Some(Complex64::new(2.0, 0.0)));
    assert_eq!(f.phases.angle(0, 1), 0.5);
    assert_eq!(f.phases.angle(1, 0), -0.5);
    assert!(parse_graph_json(r#"{"directed": true, "n": 2, "edges": [{"u": 0, "v": 1, "theta": 1.0}]}"#).is_err());
}

#[test]
fn edge_list_integers_keep_their_ids() {
    let f = parse_edge_list("3 1\n\n# comment\n1 0 # trailing\n").unwrap();
    assert_eq!(f.graph.n(), 4);
    assert!(f.graph.has_edge(3, 1) && f.graph.has_edge(1, 3) && f.graph.has_edge(0, 1));
    assert_eq!(f.graph.degree(2), 0);
}

proptest! {
    #[test]
    fn series_round_trip_is_bitwise(
        rows in prop::collection::vec((any::<f64>(), any::<f64>(), any::<f64>()), 0..40)
    ) {
        let rows: Vec<_> = rows.into_iter().filter(|(a, b, c)| a.is_finite() && b.is_finite() && c.is_finite()).collect();
        let times: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let re: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let z: Vec<Complex64> = rows.iter().map(|r| Complex64::new(r.1, r.2)).collect();
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("s.csv");

        export_series(&times, &re, &p).unwrap();
        let back = parse_rows(&fs::read_to_string(&p).unwrap());
        prop_assert_eq!(back.len(), rows.len());
        for (b, (t, v, _)) in back.iter().zip(&rows) {
            prop_assert_eq!(b[0].to_bits(), t.to_bits());
            prop_assert_eq!(b[1].to_bits(), v.to_bits());
        }

        export_complex_series(&times, &z, &p).unwrap();
        let back = parse_rows(&fs::read_to_string(&p).unwrap());
        for (b, (t, v, w)) in back.iter().zip(&rows) {
            prop_assert_eq!(b[0].to_bits(), t.to_bits());
            prop_assert_eq!(b[1].to_bits(), v.to_bits());
            prop_assert_eq!(b[2].to_bits(), w.to_bits());
        }
    }
}
