//! `pipeflow` command-line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytics::{emit_report, to_sorted_json};
use crate::backends::CostModelParams;
use crate::frameio::{write_sequence, Fps};
use crate::motion::FlowConfig;
use crate::pipeline::{
    cmd_analyze, cmd_report, cmd_run, cmd_select, cmd_simulate, BackendSpec, PipelineConfig,
    SimulateConfig, TraceDocument,
};
use crate::scheduler::{Mode, ResourcePool};
use crate::segmentation::{plan_segments, plan_to_tasks, KeyframeMode, MemDemand};
use crate::selection::{selection_report, SelectionConfig, SelectionDocument, SelectionResult};
use crate::synthetic::{generate_clip, ClipKind, ClipSpec};

#[derive(Debug, Parser)]
#[command(
    name = "pipeflow",
    version,
    about = "Motion-aware pipelined video processing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-transition SSIM and flow magnitude as CSV.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flow: FlowArgs,
    },
    /// Select the frames to edit.
    Select {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        flow: FlowArgs,
    },
    /// Split a selection into segments and list their tasks.
    Plan {
        /// Selection JSON written by `select`.
        #[arg(long)]
        selection: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        cost: CostArgs,
    },
    /// Simulate a uniform two-stage workload.
    Simulate(SimulateArgs),
    /// Run the full pipeline on a frame sequence.
    Run(RunArgs),
    /// Build report files from a trace JSON.
    Report {
        #[arg(long = "from")]
        from: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker counts for the scaling table.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        sweep: Vec<usize>,
    },
    /// Write a deterministic synthetic clip.
    GenSynthetic {
        #[arg(long, value_enum, default_value_t = ClipKind::Mixed)]
        kind: ClipKind,
        #[arg(long, default_value_t = 60)]
        frames: usize,
        #[arg(long, default_value_t = 64)]
        width: u32,
        #[arg(long, default_value_t = 64)]
        height: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct FlowArgs {
    #[arg(long, default_value_t = 3)]
    pub flow_pyramid_levels: u32,
    /// Odd window side for the least-squares solve.
    #[arg(long, default_value_t = 5)]
    pub flow_window: u32,
    #[arg(long, default_value_t = 6)]
    pub flow_iterations: u32,
}

impl FlowArgs {
    pub fn config(&self) -> FlowConfig {
        FlowConfig {
            pyramid_levels: self.flow_pyramid_levels,
            window: self.flow_window,
            iterations: self.flow_iterations,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    /// Motion when SSIM falls strictly below this.
    #[arg(long, default_value_t = 0.95)]
    pub tau_s: f64,
    /// Motion when mean flow magnitude rises strictly above this.
    #[arg(long, default_value_t = 0.5)]
    pub tau_f: f64,
}

impl SelectArgs {
    pub fn config(&self) -> SelectionConfig {
        SelectionConfig {
            tau_s: self.tau_s,
            tau_f: self.tau_f,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    /// Selected frames per segment.
    #[arg(long, default_value_t = 32)]
    pub seg_len: usize,
    /// sparse (1 in 10), dense (1 in 2) or a custom stride.
    #[arg(long, default_value = "sparse")]
    pub keyframes: KeyframeMode,
    /// Trailing frames of each segment fed to the next segment's edit.
    #[arg(long, default_value_t = 0)]
    pub overlap: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CostArgs {
    /// Diffusion timesteps.
    #[arg(long = "cost-T", default_value_t = 50)]
    pub cost_t: u64,
    /// Tokens per frame.
    #[arg(long = "cost-n", default_value_t = 4096)]
    pub cost_n: u64,
    /// Token dimension.
    #[arg(long = "cost-d", default_value_t = 320)]
    pub cost_d: u64,
    /// Time units per n^2*d operation.
    #[arg(long, default_value_t = 1e-9)]
    pub unit_cost: f64,
}

impl CostArgs {
    pub fn params(&self) -> CostModelParams {
        CostModelParams {
            timesteps: self.cost_t,
            n: self.cost_n,
            d: self.cost_d,
            unit_cost: self.unit_cost,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PoolArgs {
    #[arg(long, default_value_t = 2)]
    pub workers: usize,
    /// Maximum concurrent jobs.
    #[arg(long, default_value_t = 2)]
    pub mj: usize,
    /// Minimum free worker memory for admission.
    #[arg(long, default_value_t = 0)]
    pub mem: u64,
    /// Memory capacity of every worker.
    #[arg(long, default_value_t = 16)]
    pub worker_mem: u64,
    /// Alternate invert-only and edit-only workers.
    #[arg(long)]
    pub dedicated: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 8)]
    pub segments: usize,
    #[arg(long, default_value_t = 10)]
    pub t1: u64,
    #[arg(long, default_value_t = 10)]
    pub t2: u64,
    #[command(flatten)]
    pub pool: PoolArgs,
    /// Memory demand of every task.
    #[arg(long, default_value_t = 1)]
    pub task_mem: u64,
    /// Release invert(i) at tick i*interarrival.
    #[arg(long, default_value_t = 0)]
    pub interarrival: u64,
    /// Trace JSON destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write report files here.
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Simulated,
    Realtime,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub flow: FlowArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[command(flatten)]
    pub pool: PoolArgs,
    #[arg(long, default_value_t = 1)]
    pub invert_mem: u64,
    #[arg(long, default_value_t = 1)]
    pub edit_mem: u64,
    /// mock or stylize:<posterize|invert-colors|sepia>.
    #[arg(long, default_value = "mock")]
    pub backend: BackendSpec,
    #[command(flatten)]
    pub cost: CostArgs,
    /// Reconstruct skipped frames and smooth segment borders.
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    pub interp: OnOff,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Simulated)]
    pub mode: ModeArg,
    /// Wall-clock seconds per modeled tick in realtime mode.
    #[arg(long, default_value_t = 0.001)]
    pub seconds_per_tick: f64,
    #[arg(long, default_value = "")]
    pub prompt: String,
    #[arg(long, value_delimiter = ',')]
    pub sweep: Vec<usize>,
}

impl PoolArgs {
    pub fn pool(&self) -> ResourcePool {
        ResourcePool::alternating(
            self.workers,
            self.worker_mem,
            self.mj,
            self.mem,
            self.dedicated,
        )
    }
}

impl RunArgs {
    pub fn config(&self) -> PipelineConfig {
        PipelineConfig {
            input: self.input.clone(),
            output: self.output.clone(),
            selection: self.select.config(),
            flow: self.flow.config(),
            seg_len: self.plan.seg_len,
            keyframes: self.plan.keyframes,
            overlap: self.plan.overlap,
            pool: self.pool.pool(),
            mem: MemDemand {
                invert: self.invert_mem,
                edit: self.edit_mem,
            },
            backend: self.backend,
            cost: self.cost.params(),
            interp: self.interp == OnOff::On,
            seed: self.seed,
            mode: match self.mode {
                ModeArg::Simulated => Mode::Simulated,
                ModeArg::Realtime => Mode::Realtime {
                    seconds_per_tick: self.seconds_per_tick,
                },
            },
            prompt: self.prompt.clone(),
            sweep: self.sweep.clone(),
        }
    }
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn emit(out: Option<&Path>, text: &str) -> Result<(), Box<dyn std::error::Error>> {
    match out {
        Some(p) => {
            fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display()).into())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

pub fn execute(cli: Cli) -> CliResult {
    match cli.command {
        Command::Analyze { input, out, flow } => {
            emit(out.as_deref(), &cmd_analyze(&input, &flow.config())?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Select {
            input,
            out,
            select,
            flow,
        } => {
            let cfg = select.config();
            let result = cmd_select(&input, &cfg, &flow.config())?;
            let summary = selection_report(&result, &cfg);
            eprintln!(
                "kept {} of {} frames ({} skipped runs)",
                summary.kept,
                summary.frame_count,
                result.skipped_runs.len()
            );
            emit(out.as_deref(), &to_sorted_json(&result.to_document()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Plan {
            selection,
            out,
            plan,
            cost,
        } => {
            let raw = fs::read(&selection)
                .map_err(|e| format!("cannot read {}: {e}", selection.display()))?;
            let doc: SelectionDocument = serde_json::from_slice(&raw)?;
            let result = SelectionResult::from_document(&doc)?;
            let plan = plan_segments(&result.selected, plan.seg_len, plan.keyframes, plan.overlap)?;
            let tasks = plan_to_tasks(&plan, &cost.params(), MemDemand::default());
            eprintln!("{} segments, sizes {:?}", plan.segments.len(), plan.sizes());
            emit(
                out.as_deref(),
                &to_sorted_json(&serde_json::json!({ "plan": plan, "tasks": tasks })),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate(args) => simulate(args),
        Command::Run(args) => {
            let outcome = cmd_run(&args.config())?;
            let r = &outcome.report;
            eprintln!(
                "wrote {} frames; makespan {} {:?}; speedup {:.3}; violations {}",
                outcome.frames_written,
                r.makespan,
                r.time_unit,
                r.speedup_vs_serial,
                r.violations.len()
            );
            if let Some(b) = &r.borders {
                eprintln!("border mse {:.4}, ssim {:.4}", b.mean_mse, b.mean_ssim);
            }
            eprintln!("report: {}", outcome.report_dir.display());
            Ok(status(outcome.ok()))
        }
        Command::Report { from, out, sweep } => {
            let raw =
                fs::read(&from).map_err(|e| format!("cannot read {}: {e}", from.display()))?;
            let doc: TraceDocument = serde_json::from_slice(&raw)?;
            let report = cmd_report(&doc, &sweep)?;
            emit_report(&report, &out)?;
            eprintln!("violations {}", report.violations.len());
            Ok(status(report.violations.is_empty()))
        }
        Command::GenSynthetic {
            kind,
            frames,
            width,
            height,
            seed,
            out,
        } => {
            let spec = ClipSpec {
                kind,
                frames,
                width,
                height,
                seed,
            };
            let clip = generate_clip(&spec);
            let m = write_sequence(&clip, &out, Fps::default())?;
            eprintln!("wrote {} frames to {}", m.frame_count, out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn simulate(args: SimulateArgs) -> CliResult {
    let cfg = SimulateConfig {
        segments: args.segments,
        t1: args.t1,
        t2: args.t2,
        workers: args.pool.workers,
        max_jobs: args.pool.mj,
        mem_threshold: args.pool.mem,
        worker_mem: args.pool.worker_mem,
        task_mem: args.task_mem,
        dedicated: args.pool.dedicated,
        interarrival: args.interarrival,
    };
    let doc = cmd_simulate(&cfg)?;
    let report = cmd_report(&doc, &args.sweep)?;
    if let Some(dir) = &args.report_dir {
        emit_report(&report, dir)?;
    }
    emit(args.out.as_deref(), &to_sorted_json(&doc))?;
    let q = &report.queue.stats;
    eprintln!(
        "makespan {}; serial {}; speedup {:.3}; L {:.4} lambda {:.4} W {:.4}; violations {}",
        report.makespan,
        report.serial_makespan,
        report.speedup_vs_serial,
        q.l,
        q.lambda,
        q.w,
        report.violations.len()
    );
    Ok(status(report.violations.is_empty()))
}

/// Parses arguments, runs the command, and maps errors to exit code 1.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
