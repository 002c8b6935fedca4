//! Resolves settings from a profile file plus overrides.

use leanloop::config::CliConfig;

const FILE: &str = r#"
profile = "ablation"

[profiles.ablation]
max_iterations = 8
memory = "history-3"
llm = "coin"
coin_p = 0.2

[profiles.single]
mode = "single_shot"
"#;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("leanloop.toml");
    std::fs::write(&path, FILE).unwrap();

    let base = CliConfig {
        config_file: Some(path),
        ..Default::default()
    };
    for (label, cli) in [
        ("file default profile", base.clone()),
        ("override", base.clone().set("max_iterations", 3).set("memory", "self-managed")),
        (
            "single_shot profile",
            CliConfig {
                profile: Some("single".into()),
                ..base.clone()
            },
        ),
    ] {
        let s = cli.resolve().unwrap();
        let c = s.prover_config().unwrap();
        println!("{label}: llm={:?} iterations={} memory={:?} mode={:?}", s.llm, c.max_iterations, c.memory, c.mode);
    }
    let bad = base.set("max_iters", 3).resolve();
    println!("unknown key: {}", bad.unwrap_err());
}
