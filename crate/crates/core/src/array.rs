//! Word-organized array of bit-cells with a fixed ROM image.
//!
//! ROM images and RAM dumps share two text formats:
//!
//! * binary: one row per line, one `0`/`1` character per column;
//! * hex: one row per line, `ceil(cols / 4)` hex digits. Column 0 is the
//!   most significant bit of the first digit, so a row reads left to right
//!   in both formats. Unused low bits of the last digit must be zero.
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt;

use rayon::prelude::*;

use crate::device::{sample_device, DeviceParams, TransistorModel, VariationSpec, VtFlavor};
use crate::dynamics::{BitCell, SimConfig};
use crate::error::{Error, Result};
use crate::protocol::{read_cell, run_phase, sl_select, Mode, ModeConfig, ReadOutcome};

/// Source-line sharing used by the dual-context phase II.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlGranularity {
    /// Every column follows its own phase-I result.
    #[default]
    PerColumn,
    /// One SL for the row: phase II runs once per SL level present and each
    /// column keeps the pass that matches its phase-I result.
    PerArray,
}

impl std::str::FromStr for SlGranularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "per-column" | "column" => Ok(Self::PerColumn),
            "per-array" | "array" => Ok(Self::PerArray),
            other => Err(Error::InvalidConfig(format!(
                "unknown SL granularity {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    pub dc_sl: SlGranularity,
}

impl ArrayConfig {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        let c = Self {
            rows,
            cols,
            dc_sl: SlGranularity::default(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn word_width(&self) -> usize {
        self.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 1 || self.cols < 1 {
            return Err(Error::InvalidConfig(format!(
                "array needs at least one row and column, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

/// Row-major matrix of bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

/// The programmed threshold flavors: bit 1 is a low-V_T read port.
pub type RomImage = BitMatrix;

impl BitMatrix {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if rows < 1 || cols < 1 || bits.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} bits do not form a {rows}x{cols} matrix",
                bits.len()
            )));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![false; rows * cols])
    }

    pub fn checkerboard(rows: usize, cols: usize) -> Result<Self> {
        let bits = (0..rows * cols)
            .map(|i| (i / cols + i % cols) % 2 == 1)
            .collect();
        Self::new(rows, cols, bits)
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<bool> {
        (row < self.rows && col < self.cols).then(|| self.bits[row * self.cols + col])
    }

    pub fn row(&self, row: usize) -> Option<&[bool]> {
        (row < self.rows).then(|| &self.bits[row * self.cols..(row + 1) * self.cols])
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
        text.lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (line, l) in Self::content_lines(text) {
            let row = l
                .chars()
                .map(|ch| match ch {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::Parse {
                        line,
                        msg: format!("expected '0' or '1', found {other:?}"),
                    }),
                })
                .collect::<Result<Vec<bool>>>()?;
            if let Some(first) = rows.first().map(Vec::len) {
                if row.len() != first {
                    return Err(Error::Parse {
                        line,
                        msg: format!("row has {} columns, expected {first}", row.len()),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 0,
                msg: "no rows".into(),
            });
        }
        Self::from_rows(&rows)
    }

    pub fn parse_hex(text: &str, cols: usize) -> Result<Self> {
        if cols < 1 {
            return Err(Error::InvalidConfig("hex image needs cols >= 1".into()));
        }
        let digits = cols.div_ceil(4);
        let mut bits = Vec::new();
        let mut rows = 0;
        for (line, l) in Self::content_lines(text) {
            let l = l.trim_start_matches("0x").trim_start_matches("0X");
            if l.chars().count() != digits {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {digits} hex digits for {cols} columns"),
                });
            }
            for (k, ch) in l.chars().enumerate() {
                let d = ch.to_digit(16).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("not a hex digit: {ch:?}"),
                })?;
                for b in 0..4 {
                    let col = 4 * k + b;
                    let set = d & (8 >> b) != 0;
                    if col < cols {
                        bits.push(set);
                    } else if set {
                        return Err(Error::Parse {
                            line,
                            msg: "padding bits past the last column must be zero".into(),
                        });
                    }
                }
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::Parse {
                line: 0,
                msg: "no rows".into(),
            });
        }
        Self::new(rows, cols, bits)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            for &b in self.row(r).unwrap() {
                s.push(if b { '1' } else { '0' });
            }
            s.push('\n');
        }
        s
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::new();
        for r in 0..self.rows {
            for chunk in self.row(r).unwrap().chunks(4) {
                let d = chunk
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (b, &x)| acc | if x { 8 >> b } else { 0 });
                s.push(char::from_digit(d, 16).unwrap().to_ascii_uppercase());
            }
            s.push('\n');
        }
        s
    }

    fn check_dims(&self, cfg: &ArrayConfig) -> Result<()> {
        if self.rows != cfg.rows || self.cols != cfg.cols {
            return Err(Error::DimensionMismatch(format!(
                "image is {}x{}, array is {}x{}",
                self.rows, self.cols, cfg.rows, cfg.cols
            )));
        }
        Ok(())
    }
}

/// One row's worth of bits; column 0 is the most significant bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word(pub Vec<bool>);

impl Word {
    pub fn from_value(value: u128, width: usize) -> Self {
        Self(
            (0..width)
                .map(|c| value >> (width - 1 - c) & 1 == 1)
                .collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    /// Numeric value, if the word fits in 128 bits.
    pub fn value(&self) -> Option<u128> {
        (self.0.len() <= 128).then(|| self.0.iter().fold(0u128, |acc, &b| acc << 1 | b as u128))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Words produced by one row read; which are present depends on the mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordRead {
    pub ram: Option<Word>,
    pub rom: Option<Word>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryArray {
    config: ArrayConfig,
    cells: Vec<BitCell>,
    rom: RomImage,
    rom_only: bool,
}

/// Variation draw of one device of the cell at `(row, col)`.
pub fn array_draw_index(row: usize, col: usize, cols: usize, position: u64) -> u64 {
    ((row * cols + col) as u64) * 2 + position
}

pub fn build_array(
    config: ArrayConfig,
    rom: RomImage,
    variation: &VariationSpec,
    params: &DeviceParams,
) -> Result<MemoryArray> {
    config.validate()?;
    variation.validate()?;
    rom.check_dims(&config)?;
    let mut cells = Vec::with_capacity(config.rows * config.cols);
    for r in 0..config.rows {
        for c in 0..config.cols {
            let flavor = VtFlavor::from_rom_bit(rom.get(r, c).unwrap());
            let dev = |pos| {
                sample_device(
                    flavor,
                    variation,
                    array_draw_index(r, c, config.cols, pos),
                    params,
                )
            };
            cells.push(BitCell::with_devices(false, dev(0), dev(1))?);
        }
    }
    Ok(MemoryArray {
        config,
        cells,
        rom,
        rom_only: false,
    })
}

impl MemoryArray {
    pub fn config(&self) -> &ArrayConfig {
        &self.config
    }

    pub fn rom_image(&self) -> &RomImage {
        &self.rom
    }

    pub fn is_rom_only(&self) -> bool {
        self.rom_only
    }

    fn index(&self, row: usize, col: usize) -> Result<usize> {
        if row >= self.config.rows || col >= self.config.cols {
            return Err(Error::AddressOutOfRange {
                row,
                col,
                rows: self.config.rows,
                cols: self.config.cols,
            });
        }
        Ok(row * self.config.cols + col)
    }

    pub fn cell(&self, row: usize, col: usize) -> Result<&BitCell> {
        Ok(&self.cells[self.index(row, col)?])
    }

    pub fn cells(&self) -> &[BitCell] {
        &self.cells
    }

    /// Stores `bit` in one cell. Writing RAM data ends ROM-only mode.
    pub fn write_ram(&mut self, row: usize, col: usize, bit: bool) -> Result<()> {
        let i = self.index(row, col)?;
        self.cells[i].set_q(bit);
        self.rom_only = false;
        Ok(())
    }

    pub fn write_word(&mut self, row: usize, word: &Word) -> Result<()> {
        if word.width() != self.config.cols {
            return Err(Error::DimensionMismatch(format!(
                "word of {} bits for {} columns",
                word.width(),
                self.config.cols
            )));
        }
        for (c, &b) in word.0.iter().enumerate() {
            self.write_ram(row, c, b)?;
        }
        Ok(())
    }

    /// Clears every RAM bit and switches the array to ROM-only mode.
    pub fn enter_rom_only_mode(&mut self) {
        for cell in &mut self.cells {
            cell.set_q(false);
        }
        self.rom_only = true;
    }

    pub fn ram_dump(&self) -> BitMatrix {
        BitMatrix {
            rows: self.config.rows,
            cols: self.config.cols,
            bits: self.cells.iter().map(BitCell::q).collect(),
        }
    }

    /// Loads RAM contents; like any write this ends ROM-only mode.
    pub fn ram_restore(&mut self, ram: &BitMatrix) -> Result<()> {
        ram.check_dims(&self.config)?;
        for (cell, &b) in self.cells.iter_mut().zip(&ram.bits) {
            cell.set_q(b);
        }
        self.rom_only = false;
        Ok(())
    }

    /// Reads one row with `mode`, column by column.
    pub fn read_word<M: TransistorModel + ?Sized>(
        &self,
        mode: &ModeConfig,
        row: usize,
        cfg: &SimConfig,
        model: &M,
    ) -> Result<WordRead> {
        self.index(row, 0)?;
        if mode.mode == Mode::RomOnly && !self.rom_only {
            return Err(Error::ModeMismatch(
                "ROM-only read before entering ROM-only mode".into(),
            ));
        }
        let cells = &self.cells[row * self.config.cols..(row + 1) * self.config.cols];
        if mode.mode == Mode::DualContext && self.config.dc_sl == SlGranularity::PerArray {
            return read_dual_shared_sl(cells, mode, cfg, model);
        }
        let outs: Vec<ReadOutcome> = cells
            .par_iter()
            .map(|cell| read_cell(cell, mode, cfg, model))
            .collect::<Result<_>>()?;
        let word = |pick: fn(&ReadOutcome) -> Option<bool>| {
            outs.iter()
                .map(pick)
                .collect::<Option<Vec<bool>>>()
                .map(Word)
        };
        Ok(WordRead {
            ram: word(|o| o.ram),
            rom: word(|o| o.rom),
        })
    }
}

fn read_dual_shared_sl<M: TransistorModel + ?Sized>(
    cells: &[BitCell],
    mode: &ModeConfig,
    cfg: &SimConfig,
    model: &M,
) -> Result<WordRead> {
    let ram: Vec<bool> = cells
        .par_iter()
        .map(|cell| run_phase(cell, &mode.phase1, cfg, model).map(|o| o.bit))
        .collect::<Result<_>>()?;
    let mut rom = vec![false; cells.len()];
    for level in [false, true] {
        if !ram.contains(&level) {
            continue;
        }
        // The shared SL drives every column; only matching columns are kept.
        let plan = sl_select(level, mode)?;
        let pass: Vec<bool> = cells
            .par_iter()
            .map(|cell| run_phase(cell, &plan, cfg, model).map(|o| o.bit))
            .collect::<Result<_>>()?;
        for (c, &r) in ram.iter().enumerate() {
            if r == level {
                rom[c] = pass[c];
            }
        }
    }
    Ok(WordRead {
        ram: Some(Word(ram)),
        rom: Some(Word(rom)),
    })
}
