use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use slicedict::engine::{train_with_sink, NullSink};
use slicedict::separation::{boost_texture, TvOptions, TvVariant};
use slicedict::synthetic::random_mask;
use slicedict::{
    init_dictionary, inpaint, preprocess, psnr, separate, Image, PreprocessStatus, PursuitConfig,
    SeparationConfig, TrainConfig,
};

use crate::args::{EnhanceArgs, InpaintArgs, SeparateArgs, SeparationArgs, TrainArgs};
use crate::color::{lab_to_srgb, srgb_to_lab};
use crate::manifest::{sidecar, RunManifest};
use crate::metrics::CsvSink;
use crate::pnm::{self, Raster};
use crate::{dictfile, mosaic};

fn image_files(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .with_context(|| format!("listing {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    // directory order is platform dependent
    files.sort();
    Ok(files)
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let f = args.filter_size;
    let mut images = Vec::new();
    let mut loaded = Vec::new();
    for path in image_files(&args.input)? {
        let raster = match pnm::read(&path) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("warning: skipping {}: {e:#}", path.display());
                continue;
            }
        };
        if raster.height < f || raster.width < f {
            eprintln!("warning: skipping {}: smaller than the {f}x{f} filter", path.display());
            continue;
        }
        let (img, status) = preprocess(&raster.luma());
        if status == PreprocessStatus::ConstantInput {
            eprintln!("warning: {} is constant", path.display());
        }
        images.push(img);
        loaded.push(path.display().to_string());
    }
    if images.is_empty() {
        bail!("no readable images under {}", args.input.display());
    }

    let cfg = TrainConfig {
        lambda: args.lambda,
        rho: args.rho,
        iterations: args.iters,
        subsample: args.subsample,
        pursuit: PursuitConfig {
            max_nonzeros: args.max_nonzeros,
            ..Default::default()
        },
        dict_sweeps: args.dict_sweeps,
        seed: args.seed,
    };
    let d0 = init_dictionary(f * f, args.filters, args.seed);
    let (dict, _) = match &args.log {
        Some(log) => {
            let file = fs::File::create(log).with_context(|| format!("creating {}", log.display()))?;
            let mut sink = CsvSink::new(BufWriter::new(file));
            let out = train_with_sink(&images, &cfg, &d0, &mut sink)?;
            sink.finish().with_context(|| format!("writing {}", log.display()))?;
            out
        }
        None => train_with_sink(&images, &cfg, &d0, &mut NullSink)?,
    };

    dictfile::write(&args.out, &dict)?;
    let mosaic_path = args.mosaic.clone().unwrap_or_else(|| sidecar(&args.out, "mosaic.pgm"));
    pnm::write_gray(&mosaic_path, &mosaic::mosaic(&dict, f))?;

    let mut manifest = RunManifest::new("train", args, args.seed)?;
    manifest.inputs = loaded;
    manifest.pipeline = vec![
        "grayscale: BT.601 luma of samples scaled to [0, 1]".into(),
        "per image: subtract mean, divide by population std".into(),
        format!("initial dictionary: seeded normal draws, seed {}", args.seed),
    ];
    manifest.write_next_to(&args.out)?;
    println!(
        "trained {} atoms of {f}x{f} on {} image(s); dictionary written to {}",
        args.filters,
        images.len(),
        args.out.display()
    );
    Ok(())
}

fn read_mask(path: &Path, height: usize, width: usize) -> Result<Image> {
    let raster = pnm::read(path)?;
    ensure!(
        raster.height == height && raster.width == width,
        "mask is {}x{}, image is {height}x{width}",
        raster.height,
        raster.width
    );
    Ok(raster.luma().map(|v| if v * 255.0 > 127.0 { 1.0 } else { 0.0 }))
}

/// Mean and population std over the observed pixels.
fn observed_stats(y: &Image, mask: &Image) -> (f64, f64) {
    let seen: Vec<f64> = y.data().iter().zip(mask.data()).filter(|(_, &m)| m > 0.0).map(|(&v, _)| v).collect();
    if seen.is_empty() {
        return (0.0, 1.0);
    }
    let mean = seen.iter().sum::<f64>() / seen.len() as f64;
    let var = seen.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / seen.len() as f64;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

pub fn inpaint_cmd(args: &InpaintArgs) -> Result<()> {
    let y = pnm::read(&args.input)?.luma();
    let (h, w) = (y.height(), y.width());
    let mask = match (&args.mask, args.drop_fraction) {
        (Some(path), _) => read_mask(path, h, w)?,
        (None, Some(p)) => random_mask(h, w, p, args.seed),
        (None, None) => bail!("either --mask or --drop-fraction is required"),
    };

    let dict = match &args.dict {
        Some(path) => dictfile::read(path)?,
        None => init_dictionary(args.filter_size * args.filter_size, args.filters, args.seed),
    };
    let (mean, std) = observed_stats(&y, &mask);
    let normalized = y.map(|v| (v - mean) / std).mul(&mask);
    let cfg = TrainConfig {
        lambda: args.lambda,
        rho: args.rho,
        iterations: args.iters,
        seed: args.seed,
        ..Default::default()
    };
    let restored = inpaint(&normalized, &mask, &dict, &cfg, args.learn_on_input)?.map(|v| v * std + mean);
    pnm::write_gray(&args.out, &restored)?;

    let mut manifest = RunManifest::new("inpaint", args, args.seed)?;
    manifest.inputs.push(args.input.display().to_string());
    manifest.pipeline = vec![
        "grayscale: BT.601 luma of samples scaled to [0, 1]".into(),
        "normalized by mean and std of the observed pixels, undone on output".into(),
        "output: the sparse reconstruction at every pixel".into(),
    ];

    if let Some(reference) = &args.reference {
        let clean = pnm::read(reference)?.luma();
        clean.check_same_shape(&y)?;
        // scores live on the reference's normalized scale
        let (m, s) = (clean.mean(), clean.std());
        let s = if s > 0.0 { s } else { 1.0 };
        let norm = |v: &Image| v.map(|p| (p - m) / s);
        let restored_db = psnr(&norm(&clean), &norm(&restored))?;
        let filled = Image::from_fn(h, w, |r, c| if mask.get(r, c) > 0.0 { y.get(r, c) } else { mean });
        let corrupted_db = psnr(&norm(&clean), &norm(&filled))?;
        println!("PSNR restored {restored_db:.2} dB, mean-filled input {corrupted_db:.2} dB");
        manifest.inputs.push(reference.display().to_string());
    }
    manifest.write_next_to(&args.out)?;
    println!("restored image written to {}", args.out.display());
    Ok(())
}

/// The plane to decompose: gray samples, or CIELAB lightness scaled to
/// `[0, 1]` with the chroma kept aside.
struct Plane {
    channel: Image,
    chroma: Option<Vec<[f64; 2]>>,
}

impl Plane {
    fn from_raster(r: &Raster) -> Self {
        if !r.is_color() {
            return Self { channel: r.luma(), chroma: None };
        }
        let mut light = Vec::with_capacity(r.width * r.height);
        let mut chroma = Vec::with_capacity(r.width * r.height);
        for p in r.samples.chunks_exact(3) {
            let [l, a, b] = srgb_to_lab([p[0], p[1], p[2]]);
            light.push(l / 100.0);
            chroma.push([a, b]);
        }
        let channel = Image::new(r.height, r.width, light).expect("raster dimensions are valid");
        Self { channel, chroma: Some(chroma) }
    }

    /// Rebuilds a raster from a replacement channel.
    fn with_channel(&self, channel: &Image) -> Raster {
        match &self.chroma {
            None => Raster::gray(channel),
            Some(chroma) => {
                let samples = channel
                    .data()
                    .iter()
                    .zip(chroma)
                    .flat_map(|(&l, &[a, b])| lab_to_srgb([100.0 * l, a, b]))
                    .collect();
                Raster {
                    width: channel.width(),
                    height: channel.height(),
                    channels: 3,
                    samples,
                }
            }
        }
    }
}

fn separation_config(a: &SeparationArgs) -> SeparationConfig {
    SeparationConfig {
        lambda: a.lambda,
        rho: a.rho,
        eta: a.eta,
        xi: a.xi,
        iterations: a.iters,
        learn_dictionary: !a.no_learn,
        tv: TvOptions {
            variant: if a.anisotropic { TvVariant::Anisotropic } else { TvVariant::Isotropic },
            ..Default::default()
        },
        filter: a.filter_size,
        atoms: a.filters,
        seed: a.seed,
        ..Default::default()
    }
}

/// Cartoon and texture of `channel` in its own units. The solver runs on
/// the normalized channel so its weights do not depend on image contrast.
fn split_layers(channel: &Image, a: &SeparationArgs) -> Result<(Image, Image)> {
    let f = a.filter_size;
    ensure!(
        channel.height() >= f && channel.width() >= f,
        "image is smaller than the {f}x{f} filter"
    );
    let (normalized, status) = preprocess(channel);
    if status == PreprocessStatus::ConstantInput {
        return Ok((channel.clone(), Image::zeros(channel.height(), channel.width())));
    }
    let (mean, std) = (channel.mean(), channel.std());
    let cfg = separation_config(a);
    let d0 = init_dictionary(f * f, a.filters, a.seed);
    let out = separate(&normalized, &d0, &cfg)?;
    Ok((out.cartoon.map(|v| v * std + mean), out.texture.scale(std)))
}

fn separation_manifest(name: &str, args: &impl serde::Serialize, a: &SeparationArgs, color: bool) -> Result<RunManifest> {
    let mut m = RunManifest::new(name, args, a.seed)?;
    m.inputs.push(a.input.display().to_string());
    m.pipeline = vec![
        if color {
            "color: sRGB to CIELAB (D65), lightness channel L/100 processed, chroma kept".into()
        } else {
            "grayscale samples scaled to [0, 1]".into()
        },
        "channel normalized by mean and std for the solver, undone on output".into(),
        format!("texture dictionary: seeded normal draws, seed {}", a.seed),
    ];
    Ok(m)
}

pub fn separate_cmd(args: &SeparateArgs) -> Result<()> {
    let raster = pnm::read(&args.common.input)?;
    let plane = Plane::from_raster(&raster);
    let (cartoon, texture) = split_layers(&plane.channel, &args.common)?;
    pnm::write(&args.out_cartoon, &plane.with_channel(&cartoon))?;
    pnm::write_gray(&args.out_texture, &texture.map(|v| v + 0.5))?;
    let manifest = separation_manifest("separate", args, &args.common, raster.is_color())?;
    manifest.write_next_to(&args.out_cartoon)?;
    manifest.write_next_to(&args.out_texture)?;
    println!(
        "cartoon written to {}, texture to {}",
        args.out_cartoon.display(),
        args.out_texture.display()
    );
    Ok(())
}

pub fn enhance_cmd(args: &EnhanceArgs) -> Result<()> {
    let raster = pnm::read(&args.common.input)?;
    // a unit gain must reproduce the input exactly, color round trip included
    let out = if args.factor == 1.0 {
        raster
    } else {
        let plane = Plane::from_raster(&raster);
        let (_, texture) = split_layers(&plane.channel, &args.common)?;
        plane.with_channel(&boost_texture(&plane.channel, &texture, args.factor)?)
    };
    pnm::write(&args.out, &out)?;
    separation_manifest("enhance", args, &args.common, out.is_color())?.write_next_to(&args.out)?;
    println!("enhanced image written to {}", args.out.display());
    Ok(())
}
