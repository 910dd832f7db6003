//! Manifest-backed clips and spectrograms.

use std::path::Path;

use anyhow::Context as _;
use rayon::prelude::*;

use spoofwatch::audio::{read_wav, resample, AudioClip, CANONICAL_RATE};
use spoofwatch::continual::SpecSource;
use spoofwatch::corpus::{Manifest, ManifestEntry, Split};
use spoofwatch::frontend::{FrontendConfig, LogMelExtractor, MelSpectrogram};
use spoofwatch::model::Example;

/// Manifest entries of one split, with the manifest kept for path resolution.
pub struct SplitData {
    pub manifest: Manifest,
    pub entries: Vec<ManifestEntry>,
}

impl SplitData {
    pub fn load(path: &Path, split: Split) -> anyhow::Result<Self> {
        let manifest =
            Manifest::read(path).with_context(|| format!("reading {}", path.display()))?;
        let entries: Vec<ManifestEntry> = manifest.split(split).into_iter().cloned().collect();
        if entries.is_empty() {
            anyhow::bail!("{} has no {split} entries", path.display());
        }
        Ok(Self { manifest, entries })
    }

    pub fn clip(&self, i: usize) -> anyhow::Result<AudioClip> {
        Ok(read_canonical(&self.manifest.resolve(&self.entries[i]))?)
    }

    pub fn clips(&self) -> anyhow::Result<Vec<AudioClip>> {
        (0..self.entries.len())
            .into_par_iter()
            .map(|i| self.clip(i))
            .collect()
    }

    pub fn examples(&self, frontend: &FrontendConfig) -> anyhow::Result<Vec<Example>> {
        let clips = self.clips()?;
        self.examples_from(&clips, frontend)
    }

    pub fn examples_from(
        &self,
        clips: &[AudioClip],
        frontend: &FrontendConfig,
    ) -> anyhow::Result<Vec<Example>> {
        let ex = LogMelExtractor::new(frontend, CANONICAL_RATE)?;
        clips
            .par_iter()
            .zip(&self.entries)
            .map(|(c, e)| {
                Ok(Example {
                    id: e.path.clone(),
                    spec: ex.compute(c)?,
                    label: e.label.soft(),
                })
            })
            .collect()
    }
}

/// Pool spectrograms computed from WAV files on demand.
pub struct ManifestSource {
    pub data: SplitData,
    pub extractor: LogMelExtractor,
}

impl SpecSource for ManifestSource {
    fn len(&self) -> usize {
        self.data.entries.len()
    }

    fn id(&self, index: usize) -> String {
        self.data.entries[index].path.clone()
    }

    fn spec(&self, index: usize) -> spoofwatch::Result<MelSpectrogram> {
        let clip = read_canonical(&self.data.manifest.resolve(&self.data.entries[index]))?;
        self.extractor.compute(&clip)
    }
}

/// Read a WAV file and resample it to the canonical rate if needed.
fn read_canonical(path: &Path) -> spoofwatch::Result<AudioClip> {
    let clip = read_wav(path)?;
    if clip.sample_rate() == CANONICAL_RATE {
        Ok(clip)
    } else {
        resample(&clip, CANONICAL_RATE)
    }
}
