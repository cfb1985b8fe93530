use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub const OUT_ENV: &str = "FREQTOKEN_OUT";

const AFTER_HELP: &str = "\
Exit codes:
  0  success
  1  usage error (unknown subcommand or flag, bad flag value)
  2  config or schema error (invalid JSON config, unknown key, invalid schedule)
  3  IO or format error (missing file, malformed FTKR, unwritable output)
  4  verification failure (an asserted check reported a violation)

Environment:
  FREQTOKEN_OUT  default output directory when --out is not given";

#[derive(Debug, Parser)]
#[command(name = "freqtoken", version, about = "Frequency-aware token reduction experiments", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Random seed; overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON experiment config (see schema/experiment.schema.json).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Trial count: checks per property for verify, images for
    /// gen/analyze/reduce/compare, candidate budget for search.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: Option<u64>,
    /// Output directory [default: config output_dir, then "out"].
    #[arg(long, global = true, env = OUT_ENV, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Suppress progress and summary output; errors are still reported.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// FTKR file of images (tensors `image0`, `image1`, ... of dims [side, side, channels]).
    #[arg(long, value_name = "FILE")]
    pub images: Option<PathBuf>,
    /// FTKR file of model weights; random initialization otherwise.
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic images (and optionally weights) as FTKR files.
    Gen {
        /// Also write the seeded model weights.
        #[arg(long)]
        with_weights: bool,
    },
    /// Run the seeded verification suite; exits 4 on a violation.
    Verify,
    /// Layerwise spectrum, collapse, HF/LF and AWGN analysis.
    Analyze {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Forward pass with the configured schedule and a token reducer.
    Reduce {
        #[command(flatten)]
        inputs: Inputs,
        /// frequency-aware, prune-cls, merge or pool [default: config reducer].
        #[arg(long)]
        reducer: Option<String>,
    },
    /// Final-layer comparison of every reducer under the configured schedule.
    Compare {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Per-layer MAC count.
    Flops {
        /// Model preset: deit-t, deit-s or deit-b.
        #[arg(long)]
        model: Option<String>,
        /// Use the standard three-stage schedule instead of the config's.
        #[arg(long)]
        three_stage: bool,
    },
    /// Pareto search over reduction schedules with the CKA proxy.
    Search {
        #[command(flatten)]
        inputs: Inputs,
        /// Worker threads [default: config, then all cores].
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        workers: Option<u64>,
    },
}
