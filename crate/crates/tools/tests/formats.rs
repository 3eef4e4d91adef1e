//! File-format round trips through real files.

use std::fs::File;
use std::io::BufWriter;

use cmc_core::presets::{preset, PRESET_NAMES};
use cmc_core::simulate::simulate;
use cmc_core::{CmcModel, InitialLaw, LoggingPolicy};
use cmc_tools::formats::{
    read_initial_law, read_model, read_policy, read_trajectory, write_json, write_trajectory_binary,
    write_trajectory_csv, BinaryHeader,
};
use cmc_tools::meta::{short_hash, Meta};

#[test]
fn model_policy_and_init_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in PRESET_NAMES {
        let p = preset(name).unwrap();
        let paths = ["model", "policy", "init"].map(|s| dir.path().join(format!("{name}-{s}.json")));
        write_json(&mut File::create(&paths[0]).unwrap(), &p.model).unwrap();
        write_json(&mut File::create(&paths[1]).unwrap(), &p.policy).unwrap();
        write_json(&mut File::create(&paths[2]).unwrap(), &p.init).unwrap();
        let model: CmcModel = read_model(&paths[0]).unwrap();
        let policy: LoggingPolicy = read_policy(&paths[1]).unwrap();
        let init: InitialLaw = read_initial_law(&paths[2]).unwrap();
        assert_eq!((model, policy, init), (p.model, p.policy, p.init), "{name}");
    }
}

#[test]
fn model_json_layout() {
    let p = preset("small-stationary").unwrap();
    let v = serde_json::to_value(&p.model).unwrap();
    assert_eq!(v["d"], 2);
    assert_eq!(v["k"], 2);
    assert_eq!(v["matrices"][1][0][0], 0.875);
    let s: LoggingPolicy =
        serde_json::from_str(r#"{"type": "deterministic_schedule", "schedule": {"periodic": [0, 1]}}"#).unwrap();
    assert!(s.validate(2, 2).is_ok());
}

#[test]
fn trajectories_survive_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["greedy", "episodic", "markov"] {
        let p = preset(name).unwrap();
        let (d, k) = (p.model.d(), p.model.k());
        let traj = simulate(&p.model, &p.policy, &p.init, 500, 17).unwrap();
        let csv = dir.path().join(format!("{name}.csv"));
        let bin = dir.path().join(format!("{name}.cmct"));
        let meta = Meta::new("test", &name, &[17]);
        write_trajectory_csv(&mut BufWriter::new(File::create(&csv).unwrap()), &traj, d, k, &meta).unwrap();
        let header = BinaryHeader {
            d,
            k,
            policy_hash: short_hash(&p.policy),
        };
        write_trajectory_binary(&mut BufWriter::new(File::create(&bin).unwrap()), &traj, header).unwrap();
        assert_eq!(
            read_trajectory(&csv).unwrap(),
            (traj.clone(), Some((d, k))),
            "{name} csv"
        );
        assert_eq!(read_trajectory(&bin).unwrap(), (traj, Some((d, k))), "{name} binary");
    }
}

#[test]
fn malformed_trajectories_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = [
        "i,X_i\n0,1\n",
        "i,X_i,a_i\n1,0,0\n",
        "i,X_i,a_i,omega_i\n0,0,0,2\n",
        "# d: 2\n# k: 2\ni,X_i,a_i\n0,5,0\n",
    ];
    for (n, body) in bad.iter().enumerate() {
        let path = dir.path().join(format!("bad{n}.csv"));
        std::fs::write(&path, body).unwrap();
        assert!(read_trajectory(&path).is_err(), "{body:?}");
    }
    let path = dir.path().join("short.cmct");
    std::fs::write(&path, b"CMCT\x01\x00\x02").unwrap();
    assert!(read_trajectory(&path).is_err());
}
