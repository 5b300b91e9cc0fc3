//! exposome — air-pollution dose analysis for GPS activities.
//!
//! Exit codes: 0 success, 1 input/config error, 2 the analysis ran but no
//! measurement matched (the report is still written with coverage 0), so
//! schedulers can tell data gaps from bugs.

mod commands;
mod config;
mod io_util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use commands::{AnalyzeArgs, BatchArgs, RouteArgs};

#[derive(Parser)]
#[command(
    name = "exposome",
    version,
    about = "Estimate inhaled pollutant dose and cigarette equivalents for GPS activities",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonIo {
    /// Air-quality measurements: OpenAQ-style JSON, or CSV with header
    /// station_id,parameter,value,unit,lat,lon,utc (routed on extension)
    #[arg(long)]
    aq: PathBuf,

    /// Physiology profile JSON {sex, height_in, age_y, hr_rest_bpm?,
    /// hr_max_bpm?, br_rest?, br_max?, ftp_w?} [or `profile` in --config]
    #[arg(long)]
    profile: Option<PathBuf>,

    /// Config JSON overriding defaults (windows, equivalence table, mode
    /// speeds, band breakpoints, output paths); unknown keys are rejected
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze one recorded activity (GPX or Strava-stream JSON, sniffed by content)
    Analyze {
        /// Activity file: GPX 1.1 or Strava-style stream JSON
        #[arg(long)]
        activity: PathBuf,

        #[command(flatten)]
        io: CommonIo,

        /// Report output path [default: report.json]
        #[arg(long)]
        out: Option<PathBuf>,

        /// Also write a GeoJSON exposure map here [default: none]
        #[arg(long)]
        geojson: Option<PathBuf>,

        /// Pollutant for the GeoJSON map: co|no2|o3|so2|pm25|pm10|bc
        /// [default: pm25 when analyzed, else the first analyzed]
        #[arg(long)]
        pollutant: Option<String>,
    },

    /// Analyze every *.gpx / *.json activity in a folder and write an aggregate
    Batch {
        /// Folder of activity files (processed in sorted filename order)
        #[arg(long)]
        dir: PathBuf,

        #[command(flatten)]
        io: CommonIo,

        /// Output directory for per-activity reports and aggregate.json
        /// [default: reports]
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },

    /// Forecast exposure for a planned route
    Route {
        /// Encoded polyline (standard alphabet)
        #[arg(long, conflicts_with = "points")]
        polyline: Option<String>,

        /// Polyline precision: 5 or 6 [default: 5]
        #[arg(long, default_value_t = 5)]
        precision: u32,

        /// Route JSON file: [[lat,lon],…] or {points|polyline, precision?,
        /// mode?, departure?}
        #[arg(long)]
        points: Option<PathBuf>,

        /// Transport mode: walk|run|cycle|drive
        #[arg(long)]
        mode: Option<String>,

        /// Departure time, RFC 3339 UTC (e.g. 2019-06-01T06:00:00Z);
        /// measurements are matched around this time
        #[arg(long)]
        depart: Option<String>,

        #[command(flatten)]
        io: CommonIo,

        /// Report output path [default: forecast.json]
        #[arg(long)]
        out: Option<PathBuf>,

        /// Also write a GeoJSON exposure map here [default: none]
        #[arg(long)]
        geojson: Option<PathBuf>,

        /// Pollutant for the GeoJSON map [default: pm25 when analyzed]
        #[arg(long)]
        pollutant: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version are successes; everything else is an input error.
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };

    let result = match cli.command {
        Command::Analyze {
            activity,
            io,
            out,
            geojson,
            pollutant,
        } => commands::cmd_analyze(AnalyzeArgs {
            activity,
            aq: io.aq,
            profile: io.profile,
            out,
            geojson,
            pollutant,
            config: io.config,
        }),
        Command::Batch { dir, io, out_dir } => commands::cmd_batch(BatchArgs {
            dir,
            aq: io.aq,
            profile: io.profile,
            out_dir,
            config: io.config,
        }),
        Command::Route {
            polyline,
            precision,
            points,
            mode,
            depart,
            io,
            out,
            geojson,
            pollutant,
        } => commands::cmd_route(RouteArgs {
            polyline,
            points,
            precision,
            mode,
            depart,
            aq: io.aq,
            profile: io.profile,
            out,
            geojson,
            pollutant,
            config: io.config,
        }),
    };

    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
