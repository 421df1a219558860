//! Structured-text layout documents (TOML or JSON, chosen by extension).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AtomSpec, CouplingPoint, Layout, Waveguide};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDoc {
    pub x: f64,
    pub strengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomDoc {
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveguideDoc {
    pub v: f64,
    #[serde(rename = "J0")]
    pub j0: f64,
}

/// One sample of a target relaxation profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSample {
    pub omega: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LayoutDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub points: Vec<PointDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom: Option<AtomDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveguide: Option<WaveguideDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub target: Vec<TargetSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Toml,
    Json,
}

fn format_for(path: &Path) -> Result<Format> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("toml") => Ok(Format::Toml),
        Some("json") => Ok(Format::Json),
        _ => Err(Error::invalid(format!("cannot infer document format from '{}'; use .toml or .json", path.display()))),
    }
}

impl LayoutDocument {
    pub fn from_layout(layout: &Layout, atom: Option<&AtomSpec>, waveguide: Option<&Waveguide>) -> Self {
        LayoutDocument {
            label: Some(layout.label().to_string()),
            points: layout
                .points()
                .iter()
                .map(|p| PointDoc { x: p.position, strengths: p.strengths.clone() })
                .collect(),
            atom: atom.map(|a| AtomDoc { levels: a.levels().to_vec() }),
            waveguide: waveguide.map(|w| WaveguideDoc { v: w.velocity(), j0: w.density_of_states() }),
            target: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let format = format_for(path)?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        match format {
            Format::Toml => Self::from_toml(&text),
            Format::Json => Self::from_json(&text),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = match format_for(path)? {
            Format::Toml => self.to_toml()?,
            Format::Json => self.to_json()?,
        };
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn layout(&self) -> Result<Layout> {
        let points = self.points.iter().map(|p| CouplingPoint::with_strengths(p.x, p.strengths.clone())).collect();
        Layout::new(self.label.clone().unwrap_or_else(|| "atom".into()), points)
    }

    pub fn atom_spec(&self) -> Result<Option<AtomSpec>> {
        self.atom.as_ref().map(|a| AtomSpec::new(a.levels.clone())).transpose()
    }

    /// The document's waveguide, or the dimensionless default.
    pub fn waveguide_model(&self) -> Result<Waveguide> {
        match self.waveguide {
            Some(w) => Waveguide::new(w.v, w.j0),
            None => Ok(Waveguide::dimensionless()),
        }
    }
}
