//! The `bcfl` command line.
//!
//! Results go to stdout, one per line; a single JSON line of run metadata goes
//! to stderr. Exit status is 0 on success, 1 when a nonempty result was
//! expected but nothing completes the string, and 2 on usage or input errors.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::enumeration::{all_trees, count, phi_many, DerivationTree};
use crate::error::Error;
use crate::forest::{build_forest, root_forest, ForestNode};
use crate::grammar::CnfGrammar;
use crate::oracle;
use crate::porous::PorousString;
use crate::recognizer::recognize;
use crate::sampling::{
    draw_rng, gamma_sample, validate_weights, FullCycleIndexStream, Mode, RuleWeights, Weighting,
};

pub const SEED_ENV: &str = "BCFL_SEED";

const CHUNK: usize = 4096;

#[derive(Debug, Parser)]
#[command(name = "bcfl", version, about = "Count, enumerate and sample completions of strings with holes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Input {
    /// Grammar file (`LHS -> alt | alt`, one production per line)
    grammar: PathBuf,
    /// Whitespace-separated tokens; `_` marks a hole
    porous: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print whether some completion is in the language
    Recognize(Input),
    /// Print the number of derivations over all completions
    Count(Input),
    /// Sample derivations
    Sample(SampleArgs),
    /// Print every derivation in index order
    Enumerate {
        #[command(flatten)]
        input: Input,
        /// Use the brute-force reference instead of the forest
        #[arg(long)]
        oracle: bool,
        #[arg(long, value_enum, default_value_t = Format::Sexpr)]
        format: Format,
    },
    /// Print the normalized grammar
    Cnf {
        grammar: PathBuf,
    },
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    input: Input,
    /// Number of samples, or `all`
    #[arg(long, default_value = "1")]
    k: SampleSize,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Wor)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = WeightingArg::Count)]
    weighting: WeightingArg,
    /// Rule weights for `--weighting explicit` (`weight lhs -> rhs` per line)
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Sexpr)]
    format: Format,
    /// Decoding threads
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Clone, Copy)]
enum SampleSize {
    All,
    Exactly(u64),
}

impl FromStr for SampleSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(SampleSize::All);
        }
        s.parse().map(SampleSize::Exactly).map_err(|_| format!("expected a count or `all`, got `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    /// With replacement
    #[value(alias = "with-replacement")]
    Wr,
    /// Without replacement
    #[value(alias = "without-replacement")]
    Wor,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightingArg {
    Count,
    Uniform,
    Explicit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Sexpr,
    Yield,
}

impl Format {
    fn render(self, tree: &DerivationTree, g: &CnfGrammar) -> String {
        match self {
            Format::Sexpr => tree.to_sexpr(g),
            Format::Yield => tree.yield_string(g),
        }
    }
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Empty(String),
    Io(std::io::Error),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Empty(m) => f.write_str(m),
            Failure::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

#[derive(Debug, serde::Serialize)]
struct RunMetadata {
    grammar_sha256: String,
    porous_string: String,
    count: Option<String>,
    seed: Option<u64>,
    mode: Option<String>,
    weighting: Option<String>,
    stream: Option<String>,
    version: &'static str,
}

struct Loaded {
    grammar: CnfGrammar,
    hash: String,
    porous: PorousString,
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn load(input: &Input) -> Result<Loaded, Failure> {
    let text = read(&input.grammar)?;
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    let grammar = CnfGrammar::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", input.grammar.display())))?;
    let porous = PorousString::parse(&grammar, &input.porous)?;
    Ok(Loaded { grammar, hash, porous })
}

impl Loaded {
    fn metadata(&self, count: &BigUint) -> RunMetadata {
        RunMetadata {
            grammar_sha256: self.hash.clone(),
            porous_string: self.porous.display(&self.grammar).to_string(),
            count: Some(count.to_string()),
            seed: None,
            mode: None,
            weighting: None,
            stream: None,
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    fn root(&self) -> Option<Arc<ForestNode>> {
        root_forest(&build_forest(&self.grammar, &self.porous), &self.grammar)
    }
}

fn emit_metadata(err: &mut dyn Write, meta: &RunMetadata) -> Result<(), Failure> {
    let line = serde_json::to_string(meta).expect("metadata serializes");
    writeln!(err, "{line}")?;
    Ok(())
}

/// Run the command line with explicit output streams; returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let result = match cli.command {
        Command::Recognize(input) => cmd_recognize(&input, out, err),
        Command::Count(input) => cmd_count(&input, out, err),
        Command::Sample(args) => cmd_sample(&args, out, err),
        Command::Enumerate { input, oracle, format } => cmd_enumerate(&input, oracle, format, out, err),
        Command::Cnf { grammar } => cmd_cnf(&grammar, out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            match f {
                Failure::Empty(_) => 1,
                Failure::Input(_) | Failure::Io(_) => 2,
            }
        }
    }
}

fn cmd_recognize(input: &Input, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let loaded = load(input)?;
    let member = recognize(&loaded.grammar, &loaded.porous);
    writeln!(out, "{member}")?;
    let mut meta = loaded.metadata(&BigUint::zero());
    meta.count = None;
    emit_metadata(err, &meta)
}

fn cmd_count(input: &Input, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let loaded = load(input)?;
    let total = loaded.root().map(|r| count(&r).clone()).unwrap_or_default();
    writeln!(out, "{total}")?;
    emit_metadata(err, &loaded.metadata(&total))
}

fn cmd_cnf(path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let text = read(path)?;
    let grammar = CnfGrammar::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    write!(out, "{grammar}")?;
    Ok(())
}

fn cmd_enumerate(
    input: &Input,
    use_oracle: bool,
    format: Format,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), Failure> {
    let loaded = load(input)?;
    let g = &loaded.grammar;
    if use_oracle {
        let set = oracle::enumerate_porous(g, &loaded.porous)?;
        match format {
            Format::Sexpr => {
                for tree in &set.trees {
                    writeln!(out, "{tree}")?;
                }
            }
            Format::Yield => {
                for (word, n) in &set.per_yield {
                    let text: Vec<_> = word.iter().map(|t| g.terminal_name(*t)).collect();
                    writeln!(out, "{}\t{n}", text.join(" "))?;
                }
            }
        }
        return emit_metadata(err, &loaded.metadata(&BigUint::from(set.total())));
    }
    let Some(root) = loaded.root() else {
        emit_metadata(err, &loaded.metadata(&BigUint::zero()))?;
        return Ok(());
    };
    for tree in all_trees(&root) {
        writeln!(out, "{}", format.render(&tree, g))?;
    }
    emit_metadata(err, &loaded.metadata(count(&root)))
}

fn cmd_sample(args: &SampleArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let loaded = load(&args.input)?;
    let g = &loaded.grammar;
    let seed = args.seed.unwrap_or_else(rand::random);
    let mode = match args.mode {
        ModeArg::Wr => Mode::WithReplacement,
        ModeArg::Wor => Mode::WithoutReplacement,
    };
    let weighting = match (args.weighting, &args.weights) {
        (WeightingArg::Count, None) => Weighting::CountProportional,
        (WeightingArg::Uniform, None) => Weighting::RuleUniform,
        (WeightingArg::Explicit, Some(path)) => Weighting::Explicit(RuleWeights::parse(g, &read(path)?)?),
        (WeightingArg::Explicit, None) => {
            return Err(Failure::Input("--weighting explicit needs --weights FILE".into()))
        }
        (_, Some(_)) => return Err(Failure::Input("--weights requires --weighting explicit".into())),
    };
    if mode == Mode::WithoutReplacement && !matches!(weighting, Weighting::CountProportional) {
        return Err(Failure::Input("--mode wor always samples uniformly; --weighting applies to --mode wr".into()));
    }
    if args.jobs == 0 {
        return Err(Failure::Input("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| Failure::Input(e.to_string()))?;

    let root = loaded.root();
    let total = root.as_ref().map(|r| count(r).clone()).unwrap_or_default();
    let mut meta = loaded.metadata(&total);
    meta.seed = Some(seed);
    meta.mode = Some(mode.to_string());
    meta.weighting = Some(weighting.name().to_string());

    let Some(root) = root else {
        emit_metadata(err, &meta)?;
        return Err(Failure::Empty("no completion of the string is in the language".into()));
    };

    match mode {
        Mode::WithoutReplacement => {
            let k = match args.k {
                SampleSize::All => total.clone(),
                SampleSize::Exactly(k) => BigUint::from(k),
            };
            if k > total {
                emit_metadata(err, &meta)?;
                return Err(Failure::Input(
                    Error::TooManySamples { requested: k, count: total }.to_string(),
                ));
            }
            let mut stream = FullCycleIndexStream::new(&total, seed);
            meta.stream = Some(stream.kind().to_string());
            emit_metadata(err, &meta)?;
            let mut left = k;
            while !left.is_zero() {
                let take = left.to_usize().unwrap_or(CHUNK).min(CHUNK);
                let indices: Vec<BigUint> = stream.by_ref().take(take).collect();
                let trees = pool.install(|| phi_many(&root, &indices))?;
                for tree in &trees {
                    writeln!(out, "{}", args.format.render(tree, g))?;
                }
                left -= BigUint::from(indices.len());
            }
        }
        Mode::WithReplacement => {
            validate_weights(&root, &weighting, g)?;
            let k = match args.k {
                SampleSize::All => total.to_u64().unwrap_or(u64::MAX),
                SampleSize::Exactly(k) => k,
            };
            emit_metadata(err, &meta)?;
            let mut start = 0u64;
            while start < k {
                let end = k.min(start + CHUNK as u64);
                let trees: Vec<DerivationTree> = pool.install(|| {
                    (start..end)
                        .into_par_iter()
                        .map(|j| gamma_sample(&root, &weighting, g, &mut draw_rng(seed, j)))
                        .collect::<Result<_, _>>()
                })?;
                for tree in &trees {
                    writeln!(out, "{}", args.format.render(tree, g))?;
                }
                start = end;
            }
        }
    }
    Ok(())
}
