use std::path::PathBuf;

use tcpsim::scenario::{ScriptedLoss, FTP_FLOW_ID};
use tcpsim::{build_paper_topology, PaperOverrides, ScenarioConfig, TcpVariant};

fn load(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ScenarioConfig::from_toml_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn shipped_dumbbell_config_matches_builder() {
    assert_eq!(
        load("dumbbell.toml"),
        build_paper_topology(0.1, TcpVariant::Reno, &PaperOverrides::default()).unwrap()
    );
}

#[test]
fn shipped_burst_config_matches_builder() {
    let o = PaperOverrides {
        ftp_total_bytes: Some(100_000),
        throughput_window_s: Some(0.5),
        scripted_losses: [8, 9, 10]
            .map(|segment| ScriptedLoss {
                flow: FTP_FLOW_ID,
                segment,
            })
            .to_vec(),
        ..Default::default()
    };
    assert_eq!(
        load("transfer_burst_loss.toml"),
        build_paper_topology(0.0, TcpVariant::Reno, &o).unwrap()
    );
}
