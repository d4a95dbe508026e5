//! Command-line front end shared by the `cgchain` and `cgdyn` binaries.
//!
//! Every leaf command declares its keys. Values come from defaults, then an
//! optional `--config FILE` of `key = value` lines, then flags; `CG_SEED`
//! overrides `seed` last. Unknown keys are rejected.

mod chain;
mod config;
mod dynamics;
mod output;

pub use config::{parse_config_text, parse_f64 as parse_number, Key, RunConfig};
pub use output::{svg_from_csv, Emitter};

use crate::error::{Error, Result};
use clap::{Arg, ArgAction, ArgMatches, Command};

pub(crate) type Runner = fn(&RunConfig) -> Result<()>;

pub(crate) struct Leaf {
    pub name: &'static str,
    pub about: &'static str,
    pub keys: Vec<Key>,
    pub run: Runner,
}

fn leaf_command(leaf: &Leaf) -> Command {
    let mut c = Command::new(leaf.name).about(leaf.about).arg(
        Arg::new("config").long("config").value_name("FILE").help("key = value file").action(ArgAction::Set),
    );
    for k in &leaf.keys {
        let mut help = k.help.to_string();
        if !k.default.is_empty() {
            help.push_str(&format!(" [default: {}]", k.default));
        }
        c = c.arg(Arg::new(k.name).long(k.name).value_name("VALUE").help(help).action(ArgAction::Set).allow_hyphen_values(true));
    }
    c
}

fn flags(m: &ArgMatches, leaf: &Leaf) -> Vec<(String, String)> {
    leaf.keys
        .iter()
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect()
}

fn resolve(prog: &str, path: &[&str], leaf: &Leaf, m: &ArgMatches) -> Result<RunConfig> {
    let file = match m.get_one::<String>("config") {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read config {p}: {e}")))?),
        None => None,
    };
    let command = format!("{prog} {}", path.join(" "));
    RunConfig::resolve(&command, &leaf.keys, file.as_deref(), &flags(m, leaf), std::env::var("CG_SEED").ok())
}

/// Parses argv, runs the selected command and returns the process exit code:
/// 0 on success, 2 for configuration errors, 3 for numerical failures.
fn dispatch(prog: &'static str, about: &'static str, groups: Vec<(&'static str, &'static str, Vec<Leaf>)>, leaves: Vec<Leaf>, argv: Vec<String>) -> i32 {
    let mut cmd = Command::new(prog).about(about).subcommand_required(true).arg_required_else_help(true);
    for (g, gabout, ls) in &groups {
        let mut sub = Command::new(*g).about(*gabout).subcommand_required(true).arg_required_else_help(true);
        for l in ls {
            sub = sub.subcommand(leaf_command(l));
        }
        cmd = cmd.subcommand(sub);
    }
    for l in &leaves {
        cmd = cmd.subcommand(leaf_command(l));
    }
    let m = match cmd.try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, sub) = m.subcommand().expect("subcommand required");
    let found = groups
        .iter()
        .find(|g| g.0 == name)
        .map(|g| {
            let (leaf_name, lm) = sub.subcommand().expect("subcommand required");
            (vec![name, leaf_name], g.2.iter().find(|l| l.name == leaf_name).unwrap(), lm)
        })
        .or_else(|| leaves.iter().find(|l| l.name == name).map(|l| (vec![name], l, sub)));
    let Some((path, leaf, lm)) = found else {
        eprintln!("{prog}: unknown command {name}");
        return 2;
    };
    let result = resolve(prog, &path, leaf, lm).and_then(|cfg| {
        cfg.apply_workers()?;
        (leaf.run)(&cfg)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{prog}: {e}");
            e.exit_code()
        }
    }
}

/// Entry point of `cgchain`.
pub fn cgchain_main(argv: Vec<String>) -> i32 {
    dispatch(
        "cgchain",
        "Stress-strain relations of 1D atom chains",
        vec![
            ("nn", "nearest-neighbour chains", chain::nn_leaves()),
            ("nnn", "next-to-nearest-neighbour chains", chain::nnn_leaves()),
        ],
        vec![],
        argv,
    )
}

/// Entry point of `cgdyn`.
pub fn cgdyn_main(argv: Vec<String>) -> i32 {
    dispatch("cgdyn", "Effective dynamics along a reaction coordinate", vec![], dynamics::leaves(), argv)
}
