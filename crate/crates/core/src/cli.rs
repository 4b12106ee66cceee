//! Command-line front end.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{sweep, Grid, SweepSpec, DEFAULT_ORDERS};
use crate::buffer::{optimize_overflow, IntermissionModel};
use crate::codec::{decode_with_code, encode, CodeSpec};
use crate::error::Error;
use crate::huffman::{optimal_finite, EngineRegistry, WeightSet};
use crate::model::{evaluate_penalty, Penalty, SourceModel};
use crate::registry::Registry;

#[derive(Debug, Parser)]
#[command(name = "infcode", version, about = "Optimal prefix codes under exponential and redundancy penalties")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the optimal code for a source and penalty.
    Optimize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "linear")]
        penalty: Penalty,
    },
    /// Build an optimal code for a finite weight list.
    Huffman {
        /// Newline-separated positive weights.
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value = "linear")]
        penalty: Penalty,
        /// Merge engine for exponential and linear penalties.
        #[arg(long, default_value = "heap")]
        engine: String,
    },
    /// Encode newline-separated integers into a container.
    Encode {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(long, default_value = "linear")]
        penalty: Penalty,
        /// Input text; standard input when omitted.
        #[arg(long, short)]
        input: Option<PathBuf>,
        /// Output container; standard output when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Decode a container back to newline-separated integers.
    Decode {
        #[arg(long, short)]
        input: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Find the code with the slowest-growing buffer overflow probability.
    Overflow {
        #[command(flatten)]
        model: ModelArgs,
        /// Intermission times: det:<c>, exp:<mu> or gamma:<shape>,<rate>.
        #[arg(long)]
        arrivals: IntermissionModel,
        /// Print every iterate.
        #[arg(long)]
        trace: bool,
        /// Also report e^(−s*·b) for this buffer size in bits.
        #[arg(long)]
        buffer: Option<f64>,
    },
    /// Emit a CSV of redundancy curves.
    Sweep {
        /// 2: exponential penalty, 3: linear, 4: decay ratio g(a), 5: d-th and minimax.
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=5))]
        figure: u8,
        #[arg(long, default_value_t = 0.01)]
        theta_min: f64,
        #[arg(long, default_value_t = 0.99)]
        theta_max: f64,
        #[arg(long, default_value_t = 0.5)]
        a_min: f64,
        #[arg(long, default_value_t = 4.0)]
        a_max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Penalty bases for figure 2.
        #[arg(long, value_delimiter = ',', default_value = "0.6,0.8,0.9,1.1,1.5,2")]
        a: Vec<f64>,
        /// Redundancy orders for figure 5.
        #[arg(long, value_delimiter = ',')]
        d: Vec<f64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct ModelArgs {
    /// Geometric source with ratio θ.
    #[arg(long)]
    geometric: Option<f64>,
    /// Poisson source with mean λ.
    #[arg(long)]
    poisson: Option<f64>,
    /// Finite source from newline-separated positive weights.
    #[arg(long)]
    weights: Option<PathBuf>,
}

impl ModelArgs {
    fn model(&self) -> Result<SourceModel, Failure> {
        if let Some(theta) = self.geometric {
            return Ok(SourceModel::geometric(theta)?);
        }
        if let Some(lambda) = self.poisson {
            return Ok(SourceModel::poisson(lambda)?);
        }
        let path = self.weights.as_ref().expect("clap enforces one model");
        Ok(SourceModel::finite(normalize(read_weights(path)?))?)
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct CodeArgs {
    /// Golomb code with this parameter.
    #[arg(long)]
    golomb: Option<u64>,
    #[arg(long)]
    geometric: Option<f64>,
    #[arg(long)]
    poisson: Option<f64>,
    #[arg(long)]
    weights: Option<PathBuf>,
}

/// Why a command failed: bad input files, I/O, or a library error.
#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Domain(#[from] Error),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Input(String),
}

fn io_err(path: Option<&Path>, e: io::Error) -> Failure {
    match path {
        Some(p) => Failure::Io(format!("{}: {e}", p.display())),
        None => Failure::Io(e.to_string()),
    }
}

fn read_input(path: Option<&Path>) -> Result<Vec<u8>, Failure> {
    match path {
        Some(p) => fs::read(p).map_err(|e| io_err(Some(p), e)),
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf).map_err(|e| io_err(None, e))?;
            Ok(buf)
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| io_err(Some(p), e)),
        None => stdout.write_all(bytes).map_err(|e| io_err(None, e)),
    }
}

fn read_weights(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(Some(path), e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let w: f64 = line
            .parse()
            .map_err(|_| Failure::Input(format!("{}:{}: not a number: {line:?}", path.display(), n + 1)))?;
        if !(w > 0.0 && w.is_finite()) {
            return Err(Failure::Input(format!("{}:{}: weight must be positive", path.display(), n + 1)));
        }
        out.push(w);
    }
    if out.is_empty() {
        return Err(Failure::Domain(Error::EmptyInput));
    }
    Ok(out)
}

fn normalize(weights: Vec<f64>) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

fn parse_symbols(bytes: &[u8]) -> Result<Vec<u64>, Failure> {
    let text = std::str::from_utf8(bytes).map_err(|_| Failure::Input("input is not UTF-8 text".into()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.trim()
                .parse()
                .map_err(|_| Failure::Input(format!("line {}: not a nonnegative integer: {l:?}", n + 1)))
        })
        .collect()
}

fn code_for(args: &CodeArgs, penalty: Penalty) -> Result<CodeSpec, Failure> {
    if let Some(k) = args.golomb {
        return Ok(CodeSpec::golomb(k)?);
    }
    let model = ModelArgs {
        geometric: args.geometric,
        poisson: args.poisson,
        weights: args.weights.clone(),
    }
    .model()?;
    Ok(Registry::default().optimize(&model, penalty)?.code)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    let w = |out: &mut dyn Write, s: String| out.write_all(s.as_bytes()).map_err(|e| io_err(None, e));
    match command {
        Command::Optimize { model, penalty } => {
            let model = model.model()?;
            let best = Registry::default().optimize(&model, penalty)?;
            w(out, format!("{best}\n"))
        }
        Command::Huffman { weights, penalty, engine } => {
            let probs = normalize(read_weights(&weights)?);
            let set = WeightSet::new(probs.clone())?;
            let tree = match penalty {
                Penalty::Exponential(a) => EngineRegistry::default().get(&engine)?.build(&set, a)?,
                Penalty::Linear => EngineRegistry::default().get(&engine)?.build(&set, 1.0)?,
                _ => optimal_finite(&set, penalty)?,
            };
            let model = SourceModel::finite(probs)?;
            let value = evaluate_penalty(&model, &tree.length_seq(), penalty)?;
            let mut text = String::new();
            for (i, word) in tree.codewords().iter().enumerate() {
                text.push_str(&format!("{i} {} {word}\n", word.len()));
            }
            text.push_str(&format!("penalty {penalty} = {value}\n"));
            w(out, text)
        }
        Command::Encode {
            code,
            penalty,
            input,
            output,
        } => {
            let symbols = parse_symbols(&read_input(input.as_deref())?)?;
            let code = code_for(&code, penalty)?;
            let bytes = encode(&symbols, &code)?;
            write_output(output.as_deref(), &bytes, out)
        }
        Command::Decode { input, output } => {
            let (_, symbols) = decode_with_code(&read_input(input.as_deref())?)?;
            let text: String = symbols.iter().map(|s| format!("{s}\n")).collect();
            write_output(output.as_deref(), text.as_bytes(), out)
        }
        Command::Overflow {
            model,
            arrivals,
            trace,
            buffer,
        } => {
            let model = model.model()?;
            let res = optimize_overflow(&model, &arrivals)?;
            let mut text = format!("s0 = {}\n", res.s0);
            if trace {
                for (j, it) in res.trace.iter().enumerate() {
                    text.push_str(&format!(
                        "iterate {j}: s_in = {} code {} s* = {}\n",
                        it.s_in,
                        describe(&it.code),
                        it.s_star
                    ));
                }
            }
            text.push_str(&format!("code {}\n", describe(&res.code)));
            text.push_str(&format!("s* = {}\n", res.s_star));
            text.push_str(&format!("iterations = {}\n", res.iterations));
            if let Some(b) = buffer {
                text.push_str(&format!("overflow ~ {:e} at b = {b}\n", res.overflow_estimate(b)));
            }
            w(out, text)
        }
        Command::Sweep {
            figure,
            theta_min,
            theta_max,
            a_min,
            a_max,
            step,
            a,
            d,
            output,
        } => {
            let theta = Grid::new(theta_min, theta_max, step)?;
            let spec = match figure {
                2 => SweepSpec::Exponential { theta, bases: a },
                3 => SweepSpec::Linear { theta },
                4 => SweepSpec::DecayRatio {
                    a: Grid::new(a_min, a_max, step)?,
                },
                _ => SweepSpec::Dth {
                    theta,
                    orders: if d.is_empty() { DEFAULT_ORDERS.to_vec() } else { d },
                },
            };
            let table = sweep(&spec)?;
            write_output(output.as_deref(), table.to_string().as_bytes(), out)
        }
    }
}

fn describe(code: &CodeSpec) -> String {
    match code {
        CodeSpec::Golomb { k } => format!("Golomb k={k}"),
        other => other.length_seq().to_string(),
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 2 for usage errors, 1 otherwise.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}
