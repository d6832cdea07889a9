//! Spatial working memory: an associative map from azimuth bins to the
//! people currently occupying them.
//!
//! Binding a tracked face to a bin is what later lets the agent resolve
//! "who is speaking" from nothing but a sound direction. Bins hold lists:
//! everyone starts out crowded into the arrival bin, and identity queries
//! stay explicitly ambiguous until positioning spreads people out.

use std::fmt;

use crate::error::{Error, Result};
use crate::sls::AzimuthBin;

/// Player color assigned before the session; unique per session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColorLabel {
    Blue,
    Green,
    Red,
}

impl ColorLabel {
    pub const ALL: [ColorLabel; 3] = [ColorLabel::Blue, ColorLabel::Green, ColorLabel::Red];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "blue" => Ok(ColorLabel::Blue),
            "green" => Ok(ColorLabel::Green),
            "red" => Ok(ColorLabel::Red),
            other => Err(Error::Domain(format!("unknown color label '{other}'"))),
        }
    }
}

impl fmt::Display for ColorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColorLabel::Blue => "blue",
            ColorLabel::Green => "green",
            ColorLabel::Red => "red",
        };
        f.write_str(s)
    }
}

/// One remembered person: the tracker id anchoring them to the vision
/// pipeline, their color, and the name learned during presentations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersonSlot {
    pub track_id: u64,
    pub color: ColorLabel,
    pub name: Option<String>,
}

impl PersonSlot {
    pub fn new(track_id: u64, color: ColorLabel) -> Self {
        PersonSlot {
            track_id,
            color,
            name: None,
        }
    }

    /// The label this person's data is filed under right now: the learned
    /// name once set, the color label before that.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.color.to_string())
    }

    /// Fallback label for a failed name extraction, namespaced so it cannot
    /// collide with the recognition module's open-set unknown verdict.
    pub fn unknown_label(&self) -> String {
        format!("unknown-{}", self.color)
    }
}

/// Answer to "who is at this bin".
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Occupancy {
    /// Nobody bound there.
    Empty,
    Unique(PersonSlot),
    /// More than one occupant; identity cannot be resolved from direction.
    Ambiguous(usize),
}

impl Occupancy {
    pub fn unique(&self) -> Option<&PersonSlot> {
        match self {
            Occupancy::Unique(slot) => Some(slot),
            _ => None,
        }
    }
}

/// The bin -> occupants map. A track id appears in at most one bin.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpatialMemory {
    bins: [Vec<PersonSlot>; 3],
}

impl SpatialMemory {
    pub fn new() -> Self {
        SpatialMemory::default()
    }

    /// Binds a new person to a bin. Rejects track ids already bound anywhere
    /// and colors already in use this session.
    pub fn bind(&mut self, bin: AzimuthBin, slot: PersonSlot) -> Result<()> {
        if self.find(slot.track_id).is_some() {
            return Err(Error::Consistency(format!(
                "track {} is already bound",
                slot.track_id
            )));
        }
        if self.slots().any(|(_, s)| s.color == slot.color) {
            return Err(Error::Consistency(format!(
                "color {} is already taken",
                slot.color
            )));
        }
        self.bins[bin.index()].push(slot);
        Ok(())
    }

    /// Moves a bound person to a new bin; everything else is untouched.
    /// Relocating to the current bin is a no-op.
    pub fn relocate(&mut self, track_id: u64, new_bin: AzimuthBin) -> Result<()> {
        let (old_bin, _) = self
            .find(track_id)
            .ok_or_else(|| Error::NotFound(format!("track {track_id} not bound")))?;
        if old_bin == new_bin {
            return Ok(());
        }
        let idx = self.bins[old_bin.index()]
            .iter()
            .position(|s| s.track_id == track_id)
            .expect("slot present in its bin");
        let slot = self.bins[old_bin.index()].remove(idx);
        self.bins[new_bin.index()].push(slot);
        Ok(())
    }

    /// Resolves the identity at a bin. Ambiguity is a value, not an error.
    pub fn identity_at(&self, bin: AzimuthBin) -> Occupancy {
        let occupants = &self.bins[bin.index()];
        match occupants.len() {
            0 => Occupancy::Empty,
            1 => Occupancy::Unique(occupants[0].clone()),
            n => Occupancy::Ambiguous(n),
        }
    }

    /// Sets (or overwrites) a person's name; the color label is retained
    /// for audit.
    pub fn set_name(&mut self, track_id: u64, name: impl Into<String>) -> Result<()> {
        let slot = self
            .bins
            .iter_mut()
            .flatten()
            .find(|s| s.track_id == track_id)
            .ok_or_else(|| Error::NotFound(format!("track {track_id} not bound")))?;
        slot.name = Some(name.into());
        Ok(())
    }

    pub fn find(&self, track_id: u64) -> Option<(AzimuthBin, &PersonSlot)> {
        AzimuthBin::ALL.iter().find_map(|&bin| {
            self.bins[bin.index()]
                .iter()
                .find(|s| s.track_id == track_id)
                .map(|s| (bin, s))
        })
    }

    pub fn find_by_color(&self, color: ColorLabel) -> Option<(AzimuthBin, &PersonSlot)> {
        AzimuthBin::ALL.iter().find_map(|&bin| {
            self.bins[bin.index()]
                .iter()
                .find(|s| s.color == color)
                .map(|s| (bin, s))
        })
    }

    pub fn occupants(&self, bin: AzimuthBin) -> &[PersonSlot] {
        &self.bins[bin.index()]
    }

    /// All bound slots with their bins, in bin order.
    pub fn slots(&self) -> impl Iterator<Item = (AzimuthBin, &PersonSlot)> {
        AzimuthBin::ALL
            .into_iter()
            .flat_map(move |bin| self.bins[bin.index()].iter().map(move |s| (bin, s)))
    }

    pub fn bound_count(&self) -> usize {
        self.bins.iter().map(Vec::len).sum()
    }

    /// Colors currently in use, in canonical order.
    pub fn bound_colors(&self) -> Vec<ColorLabel> {
        let mut colors: Vec<ColorLabel> = self.slots().map(|(_, s)| s.color).collect();
        colors.sort_unstable();
        colors
    }

    /// Line-oriented audit snapshot: `<bin> <track_id> <color> <name>`,
    /// with `-` for names not yet learned.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for (bin, slot) in self.slots() {
            out.push_str(&format!(
                "{} {} {} {}\n",
                bin,
                slot.track_id,
                slot.color,
                slot.name.as_deref().unwrap_or("-")
            ));
        }
        out
    }
}
