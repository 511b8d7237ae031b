//! PASCAL VOC domain types: the 21-class taxonomy, label and color images,
//! indexed-palette label files and the line-oriented box annotation format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

/// Number of scored classes (background plus 20 objects).
pub const NUM_CLASSES: usize = 21;

/// Ground-truth value for pixels excluded from scoring.
pub const VOID: u8 = 255;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "background",
    "aeroplane",
    "bicycle",
    "bird",
    "boat",
    "bottle",
    "bus",
    "car",
    "cat",
    "chair",
    "cow",
    "diningtable",
    "dog",
    "horse",
    "motorbike",
    "person",
    "pottedplant",
    "sheep",
    "sofa",
    "train",
    "tvmonitor",
];

/// Color of `index` in the canonical VOC palette.
///
/// The bits of the index are dealt round-robin into the red, green and blue
/// channels, most significant channel bit first.
pub fn voc_colormap(index: u8) -> [u8; 3] {
    let mut c = index;
    let mut rgb = [0u8; 3];
    for bit in 0..8 {
        for (channel, value) in rgb.iter_mut().enumerate() {
            *value |= ((c >> channel) & 1) << (7 - bit);
        }
        c >>= 3;
    }
    rgb
}

/// The full 256-entry palette as packed RGB bytes.
pub fn voc_palette() -> Vec<u8> {
    (0..=255u8).flat_map(voc_colormap).collect()
}

pub fn is_label_value(value: u8) -> bool {
    (value as usize) < NUM_CLASSES || value == VOID
}

/// Names for the 21 classes, indexable both ways.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTaxonomy {
    names: Vec<String>,
    lookup: HashMap<String, u8>,
}

impl Default for ClassTaxonomy {
    fn default() -> Self {
        Self::voc()
    }
}

impl ClassTaxonomy {
    pub fn voc() -> Self {
        Self::from_names(CLASS_NAMES.iter().map(|s| s.to_string()).collect())
            .expect("built-in taxonomy is valid")
    }

    /// Builds a taxonomy with custom display names. There must be exactly 21
    /// unique names and the first must be `background`.
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        if names.len() != NUM_CLASSES {
            return Err(Error::Config(format!(
                "taxonomy needs {NUM_CLASSES} class names, got {}",
                names.len()
            )));
        }
        if names[0] != "background" {
            return Err(Error::Config(format!(
                "class 0 must be \"background\", got {:?}",
                names[0]
            )));
        }
        let mut lookup = HashMap::with_capacity(NUM_CLASSES);
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("invalid class name {name:?}")));
            }
            if lookup.insert(name.clone(), i as u8).is_some() {
                return Err(Error::Config(format!("duplicate class name {name:?}")));
            }
        }
        Ok(ClassTaxonomy { names, lookup })
    }

    /// Parses one class name per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_names(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn void_index(&self) -> u8 {
        VOID
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: u8) -> Option<&str> {
        self.names.get(index as usize).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<u8> {
        self.lookup.get(name).copied()
    }

    /// Foreground class indices, 1 through 20.
    pub fn foreground(&self) -> impl Iterator<Item = u8> {
        1..NUM_CLASSES as u8
    }
}

/// Row-major grid of class indices (0..=20) or [`VOID`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl LabelImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::BadBuffer {
                len: data.len(),
                width,
                height,
                channels: 1,
            });
        }
        if let Some(pos) = data.iter().position(|&v| !is_label_value(v)) {
            return Err(Error::InvalidLabel {
                value: data[pos],
                x: (pos % width as usize) as u32,
                y: (pos / width as usize) as u32,
            });
        }
        Ok(LabelImage {
            width,
            height,
            data,
        })
    }

    /// # Panics
    /// If `value` is neither a class index nor void.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        assert!(is_label_value(value), "invalid label value {value}");
        LabelImage {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// # Panics
    /// If `value` is neither a class index nor void.
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        assert!(is_label_value(value), "invalid label value {value}");
        self.data[y as usize * self.width as usize + x as usize] = value;
    }

    /// Left-right mirror image.
    pub fn mirrored(&self) -> Self {
        let w = self.width as usize;
        let data = self
            .data
            .chunks(w.max(1))
            .flat_map(|row| row.iter().rev().copied())
            .collect();
        LabelImage { data, ..*self }
    }

    /// Encodes as an 8-bit indexed PNG carrying the VOC palette.
    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width, self.height);
            encoder.set_color(png::ColorType::Indexed);
            encoder.set_depth(png::BitDepth::Eight);
            encoder.set_palette(voc_palette());
            let mut writer = encoder.write_header()?;
            writer.write_image_data(&self.data)?;
            writer.finish()?;
        }
        Ok(out)
    }

    /// Decodes palette indices (not colors). Plain 8-bit grayscale files are
    /// accepted as well since some tools drop the palette.
    pub fn decode_png(bytes: &[u8]) -> Result<Self> {
        let mut decoder = png::Decoder::new(Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::IDENTITY);
        let mut reader = decoder.read_info()?;
        let (color, depth) = {
            let info = reader.info();
            (info.color_type, info.bit_depth)
        };
        if depth != png::BitDepth::Eight
            || !matches!(color, png::ColorType::Indexed | png::ColorType::Grayscale)
        {
            return Err(Error::UnsupportedLabelFormat(format!("{color:?} {depth:?}")));
        }
        let size = reader
            .output_buffer_size()
            .ok_or(Error::UnsupportedLabelFormat("oversized image".into()))?;
        let mut buf = vec![0; size];
        let frame = reader.next_frame(&mut buf)?;
        let (w, h) = (frame.width, frame.height);
        let row = frame.line_size;
        let data = if row == w as usize {
            buf.truncate(w as usize * h as usize);
            buf
        } else {
            buf.chunks(row)
                .take(h as usize)
                .flat_map(|r| r[..w as usize].iter().copied())
                .collect()
        };
        LabelImage::new(w, h, data)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode_png(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode_png()?).map_err(|e| Error::io(path, e))
    }
}

/// Row-major packed 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != 3 * width as usize * height as usize {
            return Err(Error::BadBuffer {
                len: data.len(),
                width,
                height,
                channels: 3,
            });
        }
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        RgbImage {
            width,
            height,
            data: color.iter().copied().cycle().take(3 * n).collect(),
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(3 * width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        RgbImage {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Pixels in row-major order.
    pub fn pixels(&self) -> impl ExactSizeIterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    pub fn mirrored(&self) -> Self {
        let (w, h) = self.dims();
        RgbImage::from_fn(w, h, |x, y| self.get(w - 1 - x, y))
    }

    /// Bilinear rescale to `width` x `height`.
    pub fn resized(&self, width: u32, height: u32) -> Self {
        if self.dims() == (width, height) {
            return self.clone();
        }
        let src = self.to_image();
        let out = image::imageops::resize(&src, width, height, image::imageops::FilterType::Triangle);
        RgbImage {
            width,
            height,
            data: out.into_raw(),
        }
    }

    pub fn to_image(&self) -> image::RgbImage {
        image::RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("buffer length checked at construction")
    }

    pub fn from_image(img: image::RgbImage) -> Self {
        RgbImage {
            width: img.width(),
            height: img.height(),
            data: img.into_raw(),
        }
    }

    /// Loads any format the `image` crate recognizes, converting to RGB.
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = image::load_from_memory(&bytes)?;
        Ok(Self::from_image(img.to_rgb8()))
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width, self.height);
            encoder.set_color(png::ColorType::Rgb);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder.write_header()?;
            writer.write_image_data(&self.data)?;
            writer.finish()?;
        }
        Ok(out)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode_png()?).map_err(|e| Error::io(path, e))
    }
}

/// Pixel rectangle with inclusive-exclusive bounds: it covers
/// `xmin..xmax` by `ymin..ymax`, so the area is exactly
/// `(xmax - xmin) * (ymax - ymin)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub xmin: u32,
    pub ymin: u32,
    pub xmax: u32,
    pub ymax: u32,
}

impl Rect {
    pub fn new(xmin: u32, ymin: u32, xmax: u32, ymax: u32) -> Self {
        Rect {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    pub fn width(&self) -> u32 {
        self.xmax.saturating_sub(self.xmin)
    }

    pub fn height(&self) -> u32 {
        self.ymax.saturating_sub(self.ymin)
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        (self.xmin..self.xmax).contains(&x) && (self.ymin..self.ymax).contains(&y)
    }

    /// Errors on zero area or on extending past a `width` x `height` image.
    pub fn check_within(&self, width: u32, height: u32) -> Result<()> {
        if self.xmin >= self.xmax || self.ymin >= self.ymax {
            return Err(Error::InvalidBox(format!("{self:?} has zero area")));
        }
        if self.xmax > width || self.ymax > height {
            return Err(Error::InvalidBox(format!(
                "{self:?} exceeds {width}x{height} image"
            )));
        }
        Ok(())
    }
}

/// A box with its foreground class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledBox {
    pub class_index: u8,
    pub rect: Rect,
}

impl LabeledBox {
    pub fn new(class_index: u8, xmin: u32, ymin: u32, xmax: u32, ymax: u32) -> Self {
        LabeledBox {
            class_index,
            rect: Rect::new(xmin, ymin, xmax, ymax),
        }
    }

    pub fn area(&self) -> u64 {
        self.rect.area()
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.rect.contains(x, y)
    }
}

/// Weak labels for one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxAnnotation {
    pub image_id: String,
    pub boxes: Vec<LabeledBox>,
}

impl BoxAnnotation {
    pub fn new(image_id: impl Into<String>, boxes: Vec<LabeledBox>) -> Self {
        BoxAnnotation {
            image_id: image_id.into(),
            boxes,
        }
    }

    pub fn validate(&self, width: u32, height: u32) -> Result<()> {
        for b in &self.boxes {
            if !(1..NUM_CLASSES as u8).contains(&b.class_index) {
                return Err(Error::NotForeground(b.class_index));
            }
            b.rect.check_within(width, height)?;
        }
        Ok(())
    }
}

/// Parses `image_id class_name xmin ymin xmax ymax` lines. Annotations come
/// back grouped per image in order of first appearance.
pub fn parse_box_file(text: &str, taxonomy: &ClassTaxonomy) -> Result<Vec<BoxAnnotation>> {
    let mut out: Vec<BoxAnnotation> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: n + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        }
        let class_index = taxonomy
            .index_of(fields[1])
            .ok_or_else(|| err(format!("unknown class {:?}", fields[1])))?;
        if class_index == 0 {
            return Err(err("boxes must carry a foreground class".into()));
        }
        let mut coords = [0u32; 4];
        for (c, f) in coords.iter_mut().zip(&fields[2..]) {
            *c = f
                .parse()
                .map_err(|_| err(format!("bad coordinate {f:?}")))?;
        }
        let b = LabeledBox::new(class_index, coords[0], coords[1], coords[2], coords[3]);
        if b.rect.area() == 0 {
            return Err(err(format!("box {coords:?} has zero area")));
        }
        let idx = *slot.entry(fields[0].to_string()).or_insert_with(|| {
            out.push(BoxAnnotation::new(fields[0], Vec::new()));
            out.len() - 1
        });
        out[idx].boxes.push(b);
    }
    Ok(out)
}

pub fn format_box_file(annotations: &[BoxAnnotation], taxonomy: &ClassTaxonomy) -> String {
    let mut s = String::new();
    for a in annotations {
        for b in &a.boxes {
            let name = taxonomy.name(b.class_index).unwrap_or("?");
            let r = &b.rect;
            let _ = writeln!(
                s,
                "{} {} {} {} {} {}",
                a.image_id, name, r.xmin, r.ymin, r.xmax, r.ymax
            );
        }
    }
    s
}
