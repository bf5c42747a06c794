mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{RunConfig, CONFIG_HELP};

/// Trend inference for serially dependent daily temperature series.
#[derive(Debug, Parser)]
#[command(name = "warmtrend", version, after_long_help = CONFIG_HELP)]
pub struct Cli {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of worker threads (defaults to all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    /// TOML configuration file (keys listed under `--help`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare block, wild and dependent wild bootstrap intervals on simulated AR(1) series.
    ///
    /// Writes `method,q0.025,q0.05,q0.25,q0.5,q0.75,q0.95,q0.975` with slopes
    /// multiplied by 1e5; the first row holds quantiles of the true slope estimates.
    SimulateTable1(Table1Args),
    /// Share of negative bootstrap slopes for trending AR(1) series of several lengths.
    ///
    /// Writes `years,n,percent_negative,mean_weight_r`.
    SimulateTable2(Table2Args),
    /// Run the per-cell pipeline over a gridded CSV and cluster the coefficient curves.
    ///
    /// Writes cells.csv (`cell_id,lat,lon,max_coeff,r2_max,sig_fraction,p_nonpositive,cluster`),
    /// curves.csv (`cell_id,k,slope,r_squared`), replicates.csv
    /// (`cell_id,k,weight_r,replicate,slope`), bic.csv (`K,family,bic,loglik,converged`),
    /// clusters.csv (`point_id,label,max_responsibility`) and manifest.txt into the output directory.
    Analyze(AnalyzeArgs),
    /// Cluster coefficient curves read from a `cell_id,k,slope,r_squared` CSV.
    ///
    /// Writes bic.csv and clusters.csv into the output directory.
    Cluster(ClusterArgs),
    /// Bootstrap the trend slope of one `date,value` series.
    ///
    /// Writes `method,level,quantile_value`; `--replicates-out` also dumps `replicate,slope`.
    Bootstrap(BootstrapArgs),
    /// Politis-White block length of the detrended residuals of a `date,value` series.
    ///
    /// Writes `n,block_length`.
    BlockLength(BlockLengthArgs),
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub trend: Option<f64>,
    #[arg(long)]
    pub innovation_sd: Option<f64>,
    #[arg(long)]
    pub outer: Option<usize>,
    #[arg(long)]
    pub inner: Option<usize>,
    #[arg(long)]
    pub selection_replicates: Option<usize>,
    /// Output CSV (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Table2Args {
    /// Comma-separated series lengths in years.
    #[arg(long, value_delimiter = ',')]
    pub years: Option<Vec<usize>>,
    #[arg(long)]
    pub trend: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub innovation_sd: Option<f64>,
    #[arg(long)]
    pub outer: Option<usize>,
    #[arg(long)]
    pub inner: Option<usize>,
    #[arg(long)]
    pub selection_replicates: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MapFormat {
    Csv,
    Geojson,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Gridded CSV with header `cell_id,lat,lon,date,value`.
    #[arg(long)]
    pub grid: PathBuf,
    /// NAO index as a `date,value` CSV; enables the NAO adjustment.
    #[arg(long)]
    pub nao: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write the cell table as GeoJSON (cells.geojson).
    #[arg(long, value_enum, default_value = "csv")]
    pub format: MapFormat,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub curves: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Comma-separated covariance families (EII, VII, EEE, VEV, VVV).
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    /// Also run k-means with this many clusters (kmeans.csv).
    #[arg(long)]
    pub kmeans: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    /// Series as a `date,value` CSV; empty values are missing days.
    #[arg(long)]
    pub input: PathBuf,
    /// efron | wild | wild_normal | dep_wild_ar1 | dep_wild_kernel | moving_block
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Fixed AR(1) weight coefficient (default: selected from the residuals).
    #[arg(long)]
    pub weight_r: Option<f64>,
    #[arg(long)]
    pub selection_replicates: Option<usize>,
    #[arg(long)]
    pub bandwidth: Option<usize>,
    /// Fixed block length (default: Politis-White rule).
    #[arg(long)]
    pub block_length: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every replicate slope as `replicate,slope`.
    #[arg(long)]
    pub replicates_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BlockLengthArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    if let Some(threads) = cli.threads.map(|t| t as usize).or(file.threads) {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    match &cli.command {
        Command::SimulateTable1(args) => commands::table1(args, &file, seed),
        Command::SimulateTable2(args) => commands::table2(args, &file, seed),
        Command::Analyze(args) => commands::analyze(args, &file, seed),
        Command::Cluster(args) => commands::cluster(args, &file, seed),
        Command::Bootstrap(args) => commands::bootstrap(args, &file, seed),
        Command::BlockLength(args) => commands::block_length(args),
    }
}
