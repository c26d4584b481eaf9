//! Command-line front end for the `classnorm` toolkit: file formats,
//! experiment configuration and the subcommands.

pub mod commands;
pub mod config;
pub mod io;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use classnorm::Result;

use crate::commands::*;
use crate::output::{Format, Output};

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write the result here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic ZSL data directory
    Synth(SynthArgs),
    /// Train an attribute embedder and write a checkpoint
    #[command(after_help = config::schema_help())]
    Train(TrainArgs),
    /// Generalized ZSL evaluation of a checkpoint
    Eval(EvalArgs),
    /// Scale that gives normalized logits a target variance
    Gamma(GammaArgs),
    /// Predicted against measured logit variance
    VarianceLab(VarianceLabArgs),
    /// Normality, correlation and norm diagnostics of class attributes
    AttrStats(AttrStatsArgs),
    /// Gradient-norm probe of plain, ZSL and ZSL+CN models
    #[command(after_help = config::schema_help())]
    ProbeSmoothness(ProbeArgs),
    /// Continual ZSL over a random class-task sequence
    #[command(after_help = config::schema_help())]
    Czsl(CzslArgs),
    /// GZSL metrics over a grid of seen-logit scales
    SweepSeenScale(SweepArgs),
}

#[derive(Parser, Debug)]
#[command(name = "classnorm", version, about = "Normalization experiments for attribute-embedding zero-shot classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub fn execute(command: &Command) -> Result<Output> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Gamma(a) => gamma(a),
        Command::VarianceLab(a) => variance_lab(a),
        Command::AttrStats(a) => attr_stats(a),
        Command::ProbeSmoothness(a) => probe_smoothness(a),
        Command::Czsl(a) => czsl(a),
        Command::SweepSeenScale(a) => sweep(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let root = match Cli::try_parse_from(args) {
        Ok(r) => r,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&root.command).and_then(|out| out.emit(root.output.format, root.output.out.as_deref())) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// The clap command tree, for help rendering.
pub fn command() -> clap::Command {
    <Cli as clap::CommandFactory>::command()
}
