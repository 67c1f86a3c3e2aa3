use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "slicedict", version, about = "Slice-based convolutional dictionary learning")]
pub struct Cli {
    /// Worker threads for the solver [default: all cores]
    #[arg(long, global = true, env = "SLICEDICT_THREADS", value_parser = positive_usize)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a dictionary from a directory of images
    Train(TrainArgs),
    /// Fill in missing pixels of an image
    Inpaint(InpaintArgs),
    /// Split an image into cartoon and texture layers
    Separate(SeparateArgs),
    /// Amplify the texture layer of an image
    Enhance(EnhanceArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Directory of PGM/PPM images, or a single image
    #[arg(long)]
    pub input: PathBuf,
    /// Number of atoms
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    pub filters: usize,
    /// Atom side length in pixels
    #[arg(long, default_value_t = 11, value_parser = positive_usize)]
    pub filter_size: usize,
    #[arg(long, default_value_t = 1.0, value_parser = non_negative, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 300)]
    pub iters: usize,
    /// Fraction of slices pursued per iteration
    #[arg(long, default_value_t = 1.0, value_parser = fraction)]
    pub subsample: f64,
    /// K-SVD passes per iteration
    #[arg(long, default_value_t = 1, value_parser = positive_usize)]
    pub dict_sweeps: usize,
    /// Optional cap on nonzeros per needle
    #[arg(long, value_parser = positive_usize)]
    pub max_nonzeros: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dictionary file
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration metrics CSV
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Atom mosaic image [default: <out>.mosaic.pgm]
    #[arg(long)]
    pub mosaic: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(ArgGroup::new("corruption").required(true).args(["mask", "drop_fraction"])))]
pub struct InpaintArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Trained dictionary file
    #[arg(long, required_unless_present = "learn_on_input")]
    pub dict: Option<PathBuf>,
    /// Learn the dictionary on the corrupted input itself
    #[arg(long, conflicts_with = "dict")]
    pub learn_on_input: bool,
    /// Mask image; pixels above 127 are observed
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Erase this fraction of pixels at random instead of reading a mask
    #[arg(long, value_parser = unit_interval)]
    pub drop_fraction: Option<f64>,
    #[arg(long, default_value_t = 0.1, value_parser = non_negative, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 300)]
    pub iters: usize,
    /// Atom count when learning on the input
    #[arg(long, default_value_t = 100, value_parser = positive_usize)]
    pub filters: usize,
    /// Atom side when learning on the input
    #[arg(long, default_value_t = 11, value_parser = positive_usize)]
    pub filter_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Restored image
    #[arg(long)]
    pub out: PathBuf,
    /// Clean image to report PSNR against
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SeparationArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Texture sparsity weight
    #[arg(long, default_value_t = 0.1, value_parser = non_negative, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Total-variation weight
    #[arg(long, default_value_t = 0.1, value_parser = non_negative, allow_negative_numbers = true)]
    pub xi: f64,
    /// Cartoon split penalty
    #[arg(long, default_value_t = 1.0, value_parser = positive, allow_negative_numbers = true)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0, value_parser = positive, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    /// Texture atoms
    #[arg(long, default_value_t = 32, value_parser = positive_usize)]
    pub filters: usize,
    #[arg(long, default_value_t = 8, value_parser = positive_usize)]
    pub filter_size: usize,
    /// Keep the seeded texture dictionary fixed
    #[arg(long)]
    pub no_learn: bool,
    /// Use anisotropic instead of isotropic total variation
    #[arg(long)]
    pub anisotropic: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SeparateArgs {
    #[command(flatten)]
    pub common: SeparationArgs,
    #[arg(long)]
    pub out_cartoon: PathBuf,
    /// Texture layer, shifted to mid-gray
    #[arg(long)]
    pub out_texture: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnhanceArgs {
    #[command(flatten)]
    pub common: SeparationArgs,
    /// Texture gain; 1 leaves the image unchanged
    #[arg(long, default_value_t = 2.0, value_parser = non_negative, allow_negative_numbers = true)]
    pub factor: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("must be > 0".into())
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err("must be >= 0".into())
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err("must be in (0, 1]".into())
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err("must be in [0, 1)".into())
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be >= 1".into()),
        Ok(v) => Ok(v),
        Err(_) => Err(format!("`{s}` is not a positive integer")),
    }
}
