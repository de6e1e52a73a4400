//! Command-line front end for the tree inventory pipeline.
//!
//! Machine-readable payloads (JSON summaries and reports) go to standard
//! output; progress prose goes to standard error. Exit codes are a stable
//! contract: 0 success, 1 validation or configuration failure, 2 I/O
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use treetally::config::PipelineConfig;
use treetally::detections::{cross_validate, parse_detections, Detection};
use treetally::error::Error;
use treetally::eval::{evaluate_inventory, EvalReport};
use treetally::inventory::{build_inventory, cluster, ClusterPoint, InventoryReport, TreeRecord};
use treetally::io;
use treetally::metadata::{parse_manifest_with, ImageMeta, ManifestFormat};
use treetally::projection::{geolocate_all, GeolocatedDetection};
use treetally::simulator::{emit, generate, SimScenario};
use treetally::Result;

#[derive(Parser)]
#[command(
    name = "treetally",
    version,
    about = "Geolocate, deduplicate and count trees from geotagged nadir drone imagery"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Generate a synthetic sortie (manifest, detections, ground truth).
    Simulate {
        /// Scenario JSON; every field optional.
        #[arg(long)]
        scenario: PathBuf,
        /// Directory for the emitted files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Project detections to GPS positions.
    Geolocate {
        /// Image metadata manifest (CSV or JSON).
        #[arg(long)]
        manifest: PathBuf,
        /// Detections JSON (array or JSON-lines).
        #[arg(long)]
        detections: PathBuf,
        /// Pipeline config JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Geojson)]
        format: OutputFormat,
    },
    /// Merge geolocated detections into unique trees.
    Inventory {
        /// Geolocated detections (GeoJSON or CSV) from `geolocate`.
        #[arg(long)]
        geolocated: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output path for the tree records.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Geojson)]
        format: OutputFormat,
        /// Also write the count report to this path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score an inventory against ground truth.
    Eval {
        /// Inventory (GeoJSON or CSV) from `inventory`.
        #[arg(long)]
        inventory: PathBuf,
        /// Ground truth CSV (tree_id,class_label,latitude,longitude,height_m).
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Chain geolocate, inventory and (optionally) eval.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        /// Ground truth CSV; when present the eval stage runs too.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for all stage outputs.
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Geojson)]
        format: OutputFormat,
    },
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Geojson,
    Csv,
}

impl OutputFormat {
    fn extension(self) -> &'static str {
        match self {
            OutputFormat::Geojson => "geojson",
            OutputFormat::Csv => "csv",
        }
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    frames: usize,
    trees: usize,
    detections: usize,
}

#[derive(Serialize)]
struct GeolocateSummary {
    detections: usize,
    geolocated: usize,
}

#[derive(Serialize)]
struct RunSummary {
    geolocated: usize,
    inventory: InventoryReport,
    eval: Option<EvalReport>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                0
            } else {
                1
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            match e {
                Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(command: CliCommand) -> Result<()> {
    match command {
        CliCommand::Simulate { scenario, out } => cmd_simulate(&scenario, &out),
        CliCommand::Geolocate {
            manifest,
            detections,
            config,
            out,
            format,
        } => cmd_geolocate(&manifest, &detections, config.as_deref(), &out, format),
        CliCommand::Inventory {
            geolocated,
            config,
            out,
            format,
            report,
        } => cmd_inventory(&geolocated, config.as_deref(), &out, format, report.as_deref()),
        CliCommand::Eval {
            inventory,
            truth,
            config,
        } => cmd_eval(&inventory, &truth, config.as_deref()),
        CliCommand::Run {
            manifest,
            detections,
            truth,
            config,
            out_dir,
            format,
        } => cmd_run(
            &manifest,
            &detections,
            truth.as_deref(),
            config.as_deref(),
            &out_dir,
            format,
        ),
    }
}

// ---------------------------------------------------------------------------
// Shared loading helpers
// ---------------------------------------------------------------------------

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::from_json(&io::read_file(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn manifest_format(path: &Path) -> ManifestFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => ManifestFormat::Json,
        _ => ManifestFormat::Csv,
    }
}

fn load_manifest(path: &Path, config: &PipelineConfig) -> Result<Vec<ImageMeta>> {
    parse_manifest_with(
        &io::read_file(path)?,
        manifest_format(path),
        config.nadir_tolerance_deg,
    )
}

fn load_detections(path: &Path) -> Result<Vec<Detection>> {
    parse_detections(&io::read_file(path)?)
}

/// Geolocated detections and inventories are accepted in either format;
/// GeoJSON starts with `{`, CSV does not.
fn looks_like_json(bytes: &[u8]) -> bool {
    bytes
        .iter()
        .find(|b| !b.is_ascii_whitespace())
        .is_some_and(|&b| b == b'{')
}

fn load_geolocated(path: &Path) -> Result<Vec<GeolocatedDetection>> {
    let bytes = io::read_file(path)?;
    if looks_like_json(&bytes) {
        io::parse_geolocated_geojson(&bytes)
    } else {
        io::parse_geolocated_csv(&bytes)
    }
}

fn load_inventory(path: &Path) -> Result<Vec<TreeRecord>> {
    let bytes = io::read_file(path)?;
    if looks_like_json(&bytes) {
        io::parse_inventory_geojson(&bytes)
    } else {
        io::parse_inventory_csv(&bytes)
    }
}

fn payload<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary serializes");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_simulate(scenario_path: &Path, out_dir: &Path) -> Result<()> {
    let scenario = SimScenario::from_json(&io::read_file(scenario_path)?)?;
    let result = generate(&scenario)?;
    emit(&result, out_dir)?;
    eprintln!(
        "simulated {} frames over {} trees into {}",
        result.manifest.len(),
        result.ground_truth.len(),
        out_dir.display()
    );
    print!(
        "{}",
        payload(&SimulateSummary {
            frames: result.manifest.len(),
            trees: result.ground_truth.len(),
            detections: result.detections.len(),
        })
    );
    Ok(())
}

fn geolocate_stage(
    manifest_path: &Path,
    detections_path: &Path,
    config: &PipelineConfig,
) -> Result<(Vec<Detection>, Vec<GeolocatedDetection>)> {
    let manifest = load_manifest(manifest_path, config)?;
    let detections = load_detections(detections_path)?;
    cross_validate(&detections, &manifest)?;
    let located = geolocate_all(&detections, &manifest, &config.geolocation_params())?;
    Ok((detections, located))
}

fn write_geolocated(located: &[GeolocatedDetection], out: &Path, format: OutputFormat) -> Result<()> {
    let text = match format {
        OutputFormat::Geojson => io::geolocated_to_geojson(located),
        OutputFormat::Csv => io::geolocated_to_csv(located),
    };
    io::write_file(out, &text)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn cmd_geolocate(
    manifest_path: &Path,
    detections_path: &Path,
    config_path: Option<&Path>,
    out: &Path,
    format: OutputFormat,
) -> Result<()> {
    let config = load_config(config_path)?;
    let (detections, located) = geolocate_stage(manifest_path, detections_path, &config)?;
    write_geolocated(&located, out, format)?;
    print!(
        "{}",
        payload(&GeolocateSummary {
            detections: detections.len(),
            geolocated: located.len(),
        })
    );
    Ok(())
}

fn inventory_stage(
    located: &[GeolocatedDetection],
    config: &PipelineConfig,
) -> Result<(Vec<TreeRecord>, InventoryReport)> {
    let points: Vec<ClusterPoint> = located.iter().map(ClusterPoint::from_geolocated).collect();
    let records = cluster(&points, config.merge_radius_m)?;
    let report = build_inventory(&records, config.merge_radius_m);
    Ok((records, report))
}

fn write_inventory(records: &[TreeRecord], out: &Path, format: OutputFormat) -> Result<()> {
    let text = match format {
        OutputFormat::Geojson => io::inventory_to_geojson(records),
        OutputFormat::Csv => io::inventory_to_csv(records),
    };
    io::write_file(out, &text)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn cmd_inventory(
    geolocated_path: &Path,
    config_path: Option<&Path>,
    out: &Path,
    format: OutputFormat,
    report_path: Option<&Path>,
) -> Result<()> {
    let config = load_config(config_path)?;
    let located = load_geolocated(geolocated_path)?;
    let (records, report) = inventory_stage(&located, &config)?;
    write_inventory(&records, out, format)?;
    let report_text = io::report_to_json(&report);
    if let Some(path) = report_path {
        io::write_file(path, &report_text)?;
        eprintln!("wrote {}", path.display());
    }
    print!("{report_text}");
    Ok(())
}

fn cmd_eval(inventory_path: &Path, truth_path: &Path, config_path: Option<&Path>) -> Result<()> {
    let config = load_config(config_path)?;
    let records = load_inventory(inventory_path)?;
    let truth = io::parse_truth_csv(&io::read_file(truth_path)?)?;
    let report = evaluate_inventory(&records, &truth, config.match_radius_m)?;
    print!("{}", io::eval_report_to_json(&report));
    Ok(())
}

fn cmd_run(
    manifest_path: &Path,
    detections_path: &Path,
    truth_path: Option<&Path>,
    config_path: Option<&Path>,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<()> {
    let config = load_config(config_path)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let (_, located) = geolocate_stage(manifest_path, detections_path, &config)?;
    let geolocated_path = out_dir.join(format!("geolocated.{}", format.extension()));
    write_geolocated(&located, &geolocated_path, format)?;

    let (records, report) = inventory_stage(&located, &config)?;
    let inventory_path = out_dir.join(format!("inventory.{}", format.extension()));
    write_inventory(&records, &inventory_path, format)?;
    let report_path = out_dir.join("report.json");
    io::write_file(&report_path, &io::report_to_json(&report))?;
    eprintln!("wrote {}", report_path.display());

    let eval = match truth_path {
        Some(truth_path) => {
            let truth = io::parse_truth_csv(&io::read_file(truth_path)?)?;
            let eval = evaluate_inventory(&records, &truth, config.match_radius_m)?;
            let eval_path = out_dir.join("eval.json");
            io::write_file(&eval_path, &io::eval_report_to_json(&eval))?;
            eprintln!("wrote {}", eval_path.display());
            Some(eval)
        }
        None => None,
    };

    print!(
        "{}",
        payload(&RunSummary {
            geolocated: located.len(),
            inventory: report,
            eval,
        })
    );
    Ok(())
}
