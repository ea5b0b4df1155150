use soliton_core::integrator::{shoot, ShootConfig};
use soliton_core::io::*;
use soliton_core::state::ShootParams;

fn tmp(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("soliton-io-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d.join("run")
}

#[test]
fn trajectory_csv_round_trips_exactly() {
    let p = ShootParams::new(4, 0.6, 0.7, (1.0f64 - 0.85).sqrt()).unwrap();
    let t = shoot(&p, &ShootConfig { horizon: 20.0, ..Default::default() }).unwrap();
    let stem = tmp("rt");
    let paths = write_trajectory_csv(&t, &stem).unwrap();
    let (h, rows) = read_csv(&paths[1]).unwrap();
    assert_eq!(h, COMPACT_HEADER);
    let compact: Vec<_> = t.compact_samples().collect();
    assert_eq!(rows.len(), compact.len());
    for (row, s) in rows.iter().zip(compact) {
        assert_eq!(row[0], Some(s.s));
        for i in 0..7 {
            assert_eq!(row[2 + i], Some(s.state[i]));
        }
        // triaxial: no C column
        assert_eq!(row[9], None);
    }
    let (h, _) = read_csv(&paths[0]).unwrap();
    assert_eq!(h, PRIMAL_HEADER);
}

#[test]
fn output_is_deterministic() {
    let p = ShootParams::biaxial(3, 0.9, (1.0f64 - 0.81).sqrt()).unwrap();
    let cfg = ShootConfig { horizon: 30.0, ..Default::default() };
    let (a, b) = (tmp("d1"), tmp("d2"));
    let pa = write_trajectory_csv(&shoot(&p, &cfg).unwrap(), &a).unwrap();
    let pb = write_trajectory_csv(&shoot(&p, &cfg).unwrap(), &b).unwrap();
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let ja = a.with_file_name("meta.json");
    write_json(&trajectory_meta(&shoot(&p, &cfg).unwrap()), &ja).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ja).unwrap()).unwrap();
    assert_eq!(v["params"]["n"], 3);
}
