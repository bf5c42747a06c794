use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use warmtrend_core::clustering::BIC_HEADER;
use warmtrend_core::grid::{cluster_results, read_curves_csv, run_grid, write_curves_csv};
use warmtrend_core::resampling::{default_r_grid, Ar1Weight, IidWeights};
use warmtrend_core::simulation::{run_table1, run_table2, write_table2_csv};
use warmtrend_core::trend::fmt_float;
use warmtrend_core::{
    bootstrap_trend_masked, export_results, fit_ols_trend, ingest_grid_csv, kmeans, politis_white_block_length,
    select_model, BlockLength, BootstrapConfig, BootstrapMethod, CellResult, CovarianceFamily, DailySeries,
    EmOptions, ExportFormat, PipelineConfig,
};

use crate::config::RunConfig;
use crate::{AnalyzeArgs, BlockLengthArgs, BootstrapArgs, ClusterArgs, MapFormat, Table1Args, Table2Args};

fn sink(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn table1(args: &Table1Args, file: &RunConfig, seed: u64) -> anyhow::Result<ExitCode> {
    let mut config = file.table1.resolve(seed);
    config.n = args.n.unwrap_or(config.n);
    config.r = args.r.unwrap_or(config.r);
    config.trend = args.trend.unwrap_or(config.trend);
    config.innovation_sd = args.innovation_sd.unwrap_or(config.innovation_sd);
    config.outer = args.outer.unwrap_or(config.outer);
    config.inner = args.inner.unwrap_or(config.inner);
    config.selection_replicates = args.selection_replicates.unwrap_or(config.selection_replicates);
    let table = run_table1(&config)?;
    let mut out = sink(args.out.as_deref())?;
    table.write_csv(&mut out)?;
    out.flush()?;
    eprintln!(
        "mean block length {:.1}, mean selected weight r {:.3}",
        table.mean_block_length, table.mean_weight_r
    );
    Ok(ExitCode::SUCCESS)
}

pub fn table2(args: &Table2Args, file: &RunConfig, seed: u64) -> anyhow::Result<ExitCode> {
    let mut config = file.table2.resolve(seed);
    if let Some(years) = &args.years {
        config.year_counts = years.clone();
    }
    config.trend = args.trend.unwrap_or(config.trend);
    config.r = args.r.unwrap_or(config.r);
    config.innovation_sd = args.innovation_sd.unwrap_or(config.innovation_sd);
    config.outer = args.outer.unwrap_or(config.outer);
    config.inner = args.inner.unwrap_or(config.inner);
    config.selection_replicates = args.selection_replicates.unwrap_or(config.selection_replicates);
    let rows = run_table2(&config)?;
    let mut out = sink(args.out.as_deref())?;
    write_table2_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn write_replicates(results: &[CellResult], out: impl Write) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["cell_id", "k", "weight_r", "replicate", "slope"])?;
    for r in results {
        for (k, weight_r, slopes) in &r.replicates {
            for (i, s) in slopes.iter().enumerate() {
                wtr.write_record([&r.cell_id, &k.to_string(), &fmt_float(*weight_r), &i.to_string(), &fmt_float(*s)])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

fn write_header_only(dir: &Path, name: &str, header: &[&str]) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(create(dir, name)?);
    wtr.write_record(header)?;
    wtr.flush()?;
    Ok(())
}

fn pipeline_echo(config: &PipelineConfig) -> Vec<(String, String)> {
    let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let year = |y: Option<i32>| y.map_or_else(|| "auto".to_owned(), |y| y.to_string());
    vec![
        ("pipeline.span".into(), fmt_float(config.span)),
        ("pipeline.k_max".into(), config.k_max.to_string()),
        ("pipeline.k_compare".into(), list(&config.k_compare)),
        ("pipeline.replicates".into(), config.replicates.to_string()),
        ("pipeline.selection_replicates".into(), config.selection_replicates.to_string()),
        ("pipeline.missing_threshold".into(), fmt_float(config.missing_threshold)),
        ("pipeline.first_year".into(), year(config.first_year)),
        ("pipeline.last_year".into(), year(config.last_year)),
        ("pipeline.cluster_k_min".into(), config.cluster_k_min.to_string()),
        ("pipeline.cluster_k_max".into(), config.cluster_k_max.to_string()),
        ("pipeline.families".into(), config.families.join(",")),
    ]
}

pub fn analyze(args: &AnalyzeArgs, file: &RunConfig, seed: u64) -> anyhow::Result<ExitCode> {
    let config = file.pipeline.resolve(seed);
    config.validate()?;
    let dataset = ingest_grid_csv(&args.grid).with_context(|| format!("reading {}", args.grid.display()))?;
    let nao = args
        .nao
        .as_ref()
        .map(|p| DailySeries::read_csv_path(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    std::fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;

    let mut run = run_grid(&dataset, nao.as_ref(), &config)?;
    let clustering = match cluster_results(&mut run.results, &config, &EmOptions::default()) {
        Ok((selection, ids)) => {
            selection.write_bic_csv(create(&args.out_dir, "bic.csv")?)?;
            selection.assignment.write_csv(&ids, create(&args.out_dir, "clusters.csv")?)?;
            format!("K={} family={} bic={}", selection.best.k, selection.best.family, fmt_float(selection.best.bic))
        }
        Err(err) => {
            eprintln!("warning: clustering skipped: {err}");
            write_header_only(&args.out_dir, "bic.csv", &BIC_HEADER)?;
            write_header_only(&args.out_dir, "clusters.csv", &["point_id", "label", "max_responsibility"])?;
            format!("skipped ({})", err.to_string().replace('\n', "; "))
        }
    };

    let mut cells = create(&args.out_dir, "cells.csv")?;
    export_results(&run.results, ExportFormat::Csv, &mut cells)?;
    cells.flush()?;
    if let MapFormat::Geojson = args.format {
        let mut geo = create(&args.out_dir, "cells.geojson")?;
        export_results(&run.results, ExportFormat::GeoJson, &mut geo)?;
        geo.flush()?;
    }
    write_curves_csv(&run.results, create(&args.out_dir, "curves.csv")?)?;
    write_replicates(&run.results, create(&args.out_dir, "replicates.csv")?)?;

    let excluded: Vec<&str> = run.results.iter().filter(|r| r.excluded).map(|r| r.cell_id.as_str()).collect();
    let failed: Vec<&str> = run.failures.iter().map(|f| f.0.as_str()).collect();
    let mut manifest: Vec<(String, String)> = vec![
        ("command".into(), "analyze".into()),
        ("version".into(), env!("CARGO_PKG_VERSION").into()),
        ("seed".into(), seed.to_string()),
        ("grid".into(), args.grid.display().to_string()),
        ("nao".into(), args.nao.as_ref().map_or_else(|| "none".into(), |p| p.display().to_string())),
        ("cells".into(), dataset.cells.len().to_string()),
        ("resolution".into(), dataset.resolution.map_or_else(|| "unknown".into(), fmt_float)),
        ("analysed".into(), run.results.iter().filter(|r| !r.excluded).count().to_string()),
        ("excluded".into(), excluded.join(",")),
        ("failed".into(), failed.join(",")),
        ("clustering".into(), clustering),
    ];
    manifest.extend(pipeline_echo(&config));
    let mut out = create(&args.out_dir, "manifest.txt")?;
    for (k, v) in &manifest {
        writeln!(out, "{k} = {v}")?;
    }
    out.flush()?;

    if run.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: {} cell(s) failed:", run.failures.len());
        for (cell, reason) in &run.failures {
            eprintln!("  {cell}: {reason}");
        }
        Ok(ExitCode::from(2))
    }
}

pub fn cluster(args: &ClusterArgs, file: &RunConfig, seed: u64) -> anyhow::Result<ExitCode> {
    let mut config = file.pipeline.resolve(seed);
    config.cluster_k_min = args.k_min.unwrap_or(config.cluster_k_min);
    config.cluster_k_max = args.k_max.unwrap_or(config.cluster_k_max);
    if let Some(f) = &args.families {
        config.families = f.clone();
    }
    config.validate()?;
    let families: Vec<CovarianceFamily> = config.covariance_families()?;
    let reader = File::open(&args.curves).with_context(|| format!("reading {}", args.curves.display()))?;
    let curves = read_curves_csv(reader)?;
    let (ids, points): (Vec<String>, Vec<Vec<f64>>) = curves
        .into_iter()
        .filter(|(id, c)| {
            let complete = c.iter().all(|v| v.is_finite());
            if !complete {
                eprintln!("warning: skipping {id}: incomplete curve");
            }
            complete
        })
        .unzip();
    if ids.is_empty() {
        bail!("no complete curves in {}", args.curves.display());
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let selection = select_model(&points, config.cluster_k_range(), &families, seed, &EmOptions::default())?;
    selection.write_bic_csv(create(&args.out_dir, "bic.csv")?)?;
    selection.assignment.write_csv(&ids, create(&args.out_dir, "clusters.csv")?)?;
    eprintln!("best: K={} family={}", selection.best.k, selection.best.family);
    if let Some(k) = args.kmeans {
        let result = kmeans(&points, k, seed)?;
        result.assignment.write_csv(&ids, create(&args.out_dir, "kmeans.csv")?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_method(name: &str, args: &BootstrapArgs, file: &RunConfig) -> anyhow::Result<BootstrapMethod> {
    let section = &file.bootstrap;
    Ok(match name {
        "efron" => BootstrapMethod::Efron,
        "wild" => BootstrapMethod::Wild(IidWeights::Rademacher),
        "wild_normal" => BootstrapMethod::Wild(IidWeights::Normal),
        "dep_wild_ar1" => match args.weight_r.or(section.weight_r) {
            Some(r) => BootstrapMethod::DepWildAr1(Ar1Weight::Fixed(r)),
            None => BootstrapMethod::DepWildAr1(Ar1Weight::Selected {
                grid: default_r_grid(),
                inner_replicates: args.selection_replicates.or(section.selection_replicates).unwrap_or(200),
            }),
        },
        "dep_wild_kernel" => BootstrapMethod::DepWildKernel {
            bandwidth: args.bandwidth.or(section.bandwidth).unwrap_or(25),
        },
        "moving_block" => BootstrapMethod::MovingBlock(
            args.block_length
                .or(section.block_length)
                .map_or(BlockLength::Auto, BlockLength::Fixed),
        ),
        other => bail!("unknown bootstrap method {other:?}"),
    })
}

fn read_series(path: &PathBuf) -> anyhow::Result<DailySeries> {
    DailySeries::read_csv_path(path).with_context(|| format!("reading {}", path.display()))
}

pub fn bootstrap(args: &BootstrapArgs, file: &RunConfig, seed: u64) -> anyhow::Result<ExitCode> {
    let name = args
        .method
        .clone()
        .or_else(|| file.bootstrap.method.clone())
        .unwrap_or_else(|| "dep_wild_ar1".into());
    let method = parse_method(&name, args, file)?;
    let replicates = args.replicates.or(file.bootstrap.replicates).unwrap_or(500);
    let series = read_series(&args.input)?;
    let config = BootstrapConfig::new(method, replicates, seed);
    let result = bootstrap_trend_masked(series.values(), Some(series.missing()), &config)?;

    let mut wtr = csv::Writer::from_writer(sink(args.out.as_deref())?);
    wtr.write_record(["method", "level", "quantile_value"])?;
    for (level, value) in &result.quantiles {
        wtr.write_record([name.as_str(), &fmt_float(*level), &fmt_float(*value)])?;
    }
    wtr.flush()?;
    if let Some(path) = &args.replicates_out {
        let mut wtr = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        wtr.write_record(["replicate", "slope"])?;
        for (i, s) in result.slope_replicates.iter().enumerate() {
            wtr.write_record([i.to_string(), fmt_float(*s)])?;
        }
        wtr.flush()?;
    }
    let mut note = format!("slope {}", fmt_float(result.point_estimate));
    if let Some(r) = result.weight_r {
        note.push_str(&format!(", weight r {r}"));
    }
    if let Some(b) = result.block_length {
        note.push_str(&format!(", block length {b}"));
    }
    eprintln!("{note}");
    Ok(ExitCode::SUCCESS)
}

pub fn block_length(args: &BlockLengthArgs) -> anyhow::Result<ExitCode> {
    let series = read_series(&args.input)?;
    let fit = fit_ols_trend(series.values(), Some(series.missing()))?;
    let b = politis_white_block_length(&fit.residuals);
    let mut wtr = csv::Writer::from_writer(sink(args.out.as_deref())?);
    wtr.write_record(["n", "block_length"])?;
    wtr.write_record([fit.n.to_string(), b.to_string()])?;
    wtr.flush()?;
    Ok(ExitCode::SUCCESS)
}
