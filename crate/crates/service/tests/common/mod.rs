//! Small CLI-built workdir shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

use dir_service::run_command;

pub const ROWS: usize = 40;

pub fn dir(args: &[&str], stdin: &str) -> (i32, String, String) {
    let mut input = stdin.as_bytes();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_command(args.iter().copied(), &mut input, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub struct Fixture {
    pub tmp: tempfile::TempDir,
    pub config: PathBuf,
}

impl Fixture {
    /// Writes a config and the synthetic corpus; `built` also runs every stage.
    pub fn new(built: bool) -> Fixture {
        let tmp = tempfile::tempdir().unwrap();
        let config = tmp.path().join("dir.toml");
        std::fs::write(
            &config,
            format!(
                "workdir = {:?}\nseed = 7\nmandatory_keys = [\"product_type\"]\n\n[provider]\nlexicon = {:?}\n\n\
                 [ingest]\nprimary_key = \"product_id\"\n",
                tmp.path().join("work").display().to_string(),
                tmp.path().join("data/lexicon.json").display().to_string(),
            ),
        )
        .unwrap();
        let f = Fixture { tmp, config };
        f.ok(&["corpus", "--out", f.data().to_str().unwrap(), "--rows", &ROWS.to_string(), "--queries", "12"]);
        if built {
            for table in ["backpacks", "perfumes", "watches"] {
                let input = f.data().join(format!("{table}.csv"));
                f.ok(&["ingest", "--input", input.to_str().unwrap(), "--table", table]);
                for stage in ["discretize", "enumerate", "generate"] {
                    f.ok(&[stage, "--table", table]);
                }
            }
        }
        f
    }

    pub fn data(&self) -> PathBuf {
        self.tmp.path().join("data")
    }

    pub fn work(&self) -> PathBuf {
        self.tmp.path().join("work")
    }

    pub fn run(&self, args: &[&str], stdin: &str) -> (i32, String, String) {
        let mut full = vec!["--config", self.config.to_str().unwrap()];
        full.extend_from_slice(args);
        dir(&full, stdin)
    }

    pub fn ok(&self, args: &[&str]) -> String {
        let (code, out, err) = self.run(args, "");
        assert_eq!(code, 0, "dir {args:?} failed: {err}");
        out
    }

    pub fn load_config(&self) -> dir_core::Config {
        dir_core::Config::load(&self.config).unwrap()
    }
}
