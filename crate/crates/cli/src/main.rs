use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use lipfrac_core::dynamics::ResolvedBcs;
use lipfrac_core::mesh::{load_mesh, MeshFormat};
use lipfrac_core::{run_config, Setup, SimulationConfig};

#[derive(Parser)]
#[command(name = "lipfrac", version, about = "Explicit dynamic fracture with Lip-field damage")]
struct Cli {
    /// Log level (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a TOML config.
    Run { config: PathBuf },
    /// Validate a config and print derived material and time-step values.
    Check { config: PathBuf },
    /// Print mesh statistics and boundary tags.
    MeshInfo {
        mesh: PathBuf,
        #[arg(long, value_parser = parse_format)]
        format: Option<MeshFormat>,
    },
}

fn parse_format(s: &str) -> Result<MeshFormat, String> {
    match s {
        "msh" | "msh_ascii_v2" => Ok(MeshFormat::MshAsciiV2),
        "native" | "native_text" => Ok(MeshFormat::NativeText),
        _ => Err(format!("unknown mesh format '{s}' (msh, native)")),
    }
}

fn load_config(path: &PathBuf) -> Result<SimulationConfig> {
    SimulationConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn check(path: &PathBuf) -> Result<()> {
    let config = load_config(path)?;
    let setup = Setup::from_config(&config)?;
    ResolvedBcs::resolve(&setup.mesh, &setup.bcs)?;
    let w = setup.params.wave_speeds();
    println!("lambda      = {:.6e} Pa", setup.params.lambda);
    println!("mu          = {:.6e} Pa", setup.params.mu);
    println!("c_d         = {:.6} m/s", w.dilatational);
    println!("c_s         = {:.6} m/s", w.shear);
    println!("c_R         = {:.6} m/s", w.rayleigh);
    println!("Yc          = {:.6e} J/m^3", setup.params.critical_energy);
    println!("h_min       = {:.6e} m", setup.mesh.min_element_size());
    println!("dt_critical = {:.6e} s", setup.time.dt_critical);
    println!("dt          = {:.6e} s", setup.time.dt);
    println!("n_steps     = {}", setup.time.n_steps);
    println!("elements    = {}", setup.mesh.num_elements());
    Ok(())
}

fn mesh_info(path: &PathBuf, format: Option<MeshFormat>) -> Result<()> {
    let format = format.unwrap_or_else(|| MeshFormat::from_path(path));
    let mesh = load_mesh(path, format).with_context(|| format!("loading {}", path.display()))?;
    println!("nodes       = {}", mesh.num_nodes());
    println!("elements    = {}", mesh.num_elements());
    println!("area        = {:.6e} m^2", mesh.total_area());
    println!("h_min       = {:.6e} m", mesh.min_element_size());
    for (tag, count) in mesh.tag_counts() {
        println!("tag {tag:<12} {count} facets, {} nodes", mesh.nodes_with_tag(&tag).len());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    match cli.command {
        Command::Run { config } => {
            let config = load_config(&config)?;
            let summary = run_config(&config)?;
            println!(
                "{} steps to t = {:.6e} s in {:.2} s; crack length {:.6e} m; outputs in {}",
                summary.steps,
                summary.t_final,
                summary.wall_time_s,
                summary.crack_length,
                config.output_dir().display()
            );
            if let Some(t) = summary.t_branch {
                println!("branching at t = {t:.6e} s");
            }
        }
        Command::Check { config } => check(&config)?,
        Command::MeshInfo { mesh, format } => mesh_info(&mesh, format)?,
    }
    Ok(())
}
