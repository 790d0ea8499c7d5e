//! ISO base media file format box tree.
//!
//! The parser walks the box structure of a file and builds a [`ContainerTree`]:
//! container boxes are recursed into, boxes with a registered field schema are
//! decoded into `(field, value)` pairs, and everything else becomes an opaque
//! node carrying only its payload byte count. Media payloads (`mdat`) are
//! skipped with a seek and never read.

mod dump;
mod schema;

pub use dump::{dump_tree, DumpFormat};
pub use schema::{decode_known_box, has_schema, DecodeError};

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, Read, Seek, SeekFrom};
use std::path::Path;

use thiserror::Error;

/// Upper bound on the number of payload bytes read for any single box.
pub const MAX_DECODE_BYTES: u64 = 64 * 1024;

/// Nesting depth beyond which container boxes are kept opaque.
const MAX_DEPTH: usize = 32;

/// Boxes whose payload is a sequence of child boxes.
pub const CONTAINER_BOXES: [&[u8; 4]; 11] = [
    b"moov", b"trak", b"mdia", b"minf", b"stbl", b"udta", b"edts", b"dinf", b"mvex", b"moof",
    b"traf",
];

/// Box types accepted as the first box of a file.
const TOP_LEVEL_BOXES: [&[u8; 4]; 14] = [
    b"ftyp", b"styp", b"moov", b"mdat", b"free", b"skip", b"wide", b"pnot", b"uuid", b"moof",
    b"mfra", b"meta", b"pdin", b"sidx",
];

/// A four character box type code.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FourCC(pub [u8; 4]);

impl FourCC {
    pub const ROOT: FourCC = FourCC(*b"root");

    pub fn is(&self, code: &[u8; 4]) -> bool {
        &self.0 == code
    }
}

impl fmt::Display for FourCC {
    /// Printable ASCII is rendered verbatim; other bytes, and the path
    /// metacharacters `/`, `\` and `@`, are rendered as `\xNN`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            if (0x20..0x7f).contains(&b) && !matches!(b, b'/' | b'\\' | b'@') {
                write!(f, "{}", b as char)?;
            } else {
                write!(f, "\\x{b:02x}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for FourCC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FourCC({self})")
    }
}

/// Header of one box as it appears in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxHeader {
    /// The 32-bit size field as stored.
    pub size: u32,
    pub type_code: FourCC,
    /// Present iff `size == 1`.
    pub large_size: Option<u64>,
    /// Present iff the type code is `uuid`.
    pub user_type: Option<[u8; 16]>,
    /// Absolute position of the header in the file.
    pub offset: u64,
    /// Resolved total box length, header included. Equals the remaining
    /// file length for a size-0 final box.
    pub extent: u64,
}

impl BoxHeader {
    pub fn header_len(&self) -> u64 {
        let mut len = 8;
        if self.large_size.is_some() {
            len += 8;
        }
        if self.user_type.is_some() {
            len += 16;
        }
        len
    }

    pub fn payload_len(&self) -> u64 {
        self.extent - self.header_len()
    }

    pub fn payload_offset(&self) -> u64 {
        self.offset + self.header_len()
    }

    fn synthetic_root(len: u64) -> Self {
        BoxHeader {
            size: 0,
            type_code: FourCC::ROOT,
            large_size: None,
            user_type: None,
            offset: 0,
            extent: len,
        }
    }
}

/// One atom of the container tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomNode {
    pub header: BoxHeader,
    /// Ordered `(field_name, canonical_value)` pairs.
    pub fields: Vec<(String, String)>,
    pub children: Vec<AtomNode>,
}

impl AtomNode {
    pub fn name(&self) -> String {
        self.header.type_code.to_string()
    }

    pub fn field(&self, name: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    /// First child with the given type code.
    pub fn child(&self, code: &[u8; 4]) -> Option<&AtomNode> {
        self.children.iter().find(|c| c.header.type_code.is(code))
    }

    /// Builds the opaque form of a box: a `stuff` marker plus the payload
    /// byte count.
    pub fn opaque(header: BoxHeader) -> Self {
        let count = header.payload_len();
        AtomNode {
            header,
            fields: opaque_fields(count),
            children: Vec::new(),
        }
    }
}

pub(crate) fn opaque_fields(count: u64) -> Vec<(String, String)> {
    vec![
        ("stuff".to_string(), "opaque".to_string()),
        ("count".to_string(), count.to_string()),
    ]
}

/// Non-fatal anomaly recorded while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub offset: u64,
    pub type_code: FourCC,
    pub message: String,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at offset {}: {}",
            self.type_code, self.offset, self.message
        )
    }
}

/// The box tree of one file under a synthetic `root` node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerTree {
    pub root: AtomNode,
    pub source_id: String,
    pub warnings: Vec<ParseWarning>,
}

impl ContainerTree {
    pub fn top_level(&self) -> &[AtomNode] {
        &self.root.children
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("NotBmff: input does not start with an ISO BMFF box")]
    NotBmff,
    #[error("TruncatedBox: box '{type_code}' at offset {offset} declares {declared} bytes but only {available} remain")]
    TruncatedBox {
        offset: u64,
        type_code: FourCC,
        declared: u64,
        available: u64,
    },
    #[error("ZeroSizeNonFinal: box '{type_code}' at offset {offset} has size 0 but is not the final top-level box")]
    ZeroSizeNonFinal { offset: u64, type_code: FourCC },
    #[error("InvalidBoxSize: box '{type_code}' at offset {offset} declares size {size}, smaller than its header")]
    InvalidBoxSize {
        offset: u64,
        type_code: FourCC,
        size: u64,
    },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl ParseError {
    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::NotBmff => "NotBmff",
            ParseError::TruncatedBox { .. } => "TruncatedBox",
            ParseError::ZeroSizeNonFinal { .. } => "ZeroSizeNonFinal",
            ParseError::InvalidBoxSize { .. } => "InvalidBoxSize",
            ParseError::Io(_) => "Io",
        }
    }
}

/// Parses the file at `path`, using the path as source id.
pub fn parse_file(path: impl AsRef<Path>) -> Result<ContainerTree, ParseError> {
    let path = path.as_ref();
    let mut reader = BufReader::new(File::open(path)?);
    parse_container(&mut reader, &path.display().to_string())
}

/// Parses the full box structure of a seekable byte source.
pub fn parse_container<R: Read + Seek>(
    source: &mut R,
    source_id: &str,
) -> Result<ContainerTree, ParseError> {
    let len = source.seek(SeekFrom::End(0))?;
    source.seek(SeekFrom::Start(0))?;
    let mut parser = Parser {
        source,
        warnings: Vec::new(),
    };
    let children = parser.parse_top_level(len)?;
    Ok(ContainerTree {
        root: AtomNode {
            header: BoxHeader::synthetic_root(len),
            fields: Vec::new(),
            children,
        },
        source_id: source_id.to_string(),
        warnings: parser.warnings,
    })
}

struct Parser<'a, R> {
    source: &'a mut R,
    warnings: Vec<ParseWarning>,
}

impl<R: Read + Seek> Parser<'_, R> {
    fn parse_top_level(&mut self, len: u64) -> Result<Vec<AtomNode>, ParseError> {
        if len < 8 {
            return Err(ParseError::NotBmff);
        }
        let mut first = [0u8; 8];
        self.source.read_exact(&mut first)?;
        let code = [first[4], first[5], first[6], first[7]];
        if !TOP_LEVEL_BOXES.contains(&&code) {
            return Err(ParseError::NotBmff);
        }
        self.parse_boxes(0, len, 0)
    }

    /// Parses the boxes laid out in `[start, end)`. Depth 0 is the file level.
    fn parse_boxes(
        &mut self,
        start: u64,
        end: u64,
        depth: usize,
    ) -> Result<Vec<AtomNode>, ParseError> {
        let mut nodes = Vec::new();
        let mut pos = start;
        while pos < end {
            let remaining = end - pos;
            if remaining < 8 {
                if depth == 0 {
                    return Err(ParseError::TruncatedBox {
                        offset: pos,
                        type_code: FourCC(*b"????"),
                        declared: 8,
                        available: remaining,
                    });
                }
                // QuickTime pads some containers (udta) with a 32-bit terminator.
                self.warnings.push(ParseWarning {
                    offset: pos,
                    type_code: FourCC(*b"????"),
                    message: format!("{remaining} trailing bytes ignored"),
                });
                break;
            }
            let header = self.read_header(pos, end, depth)?;
            let node = self.parse_box(header.clone(), depth)?;
            nodes.push(node);
            pos += header.extent;
        }
        Ok(nodes)
    }

    fn read_header(&mut self, pos: u64, end: u64, depth: usize) -> Result<BoxHeader, ParseError> {
        let remaining = end - pos;
        self.source.seek(SeekFrom::Start(pos))?;
        let mut buf = [0u8; 8];
        self.source.read_exact(&mut buf)?;
        let size = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]);
        let type_code = FourCC([buf[4], buf[5], buf[6], buf[7]]);
        let truncated = |declared: u64| ParseError::TruncatedBox {
            offset: pos,
            type_code,
            declared,
            available: remaining,
        };

        let mut header_len = 8u64;
        let mut large_size = None;
        let extent = match size {
            0 => {
                if depth != 0 {
                    return Err(ParseError::ZeroSizeNonFinal {
                        offset: pos,
                        type_code,
                    });
                }
                remaining
            }
            1 => {
                if remaining < 16 {
                    return Err(truncated(16));
                }
                let mut b = [0u8; 8];
                self.source.read_exact(&mut b)?;
                let large = u64::from_be_bytes(b);
                header_len += 8;
                large_size = Some(large);
                large
            }
            n => u64::from(n),
        };

        let mut user_type = None;
        if type_code.is(b"uuid") {
            header_len += 16;
            if remaining < header_len {
                return Err(truncated(header_len));
            }
            let mut b = [0u8; 16];
            self.source.read_exact(&mut b)?;
            user_type = Some(b);
        }

        if extent < header_len {
            return Err(ParseError::InvalidBoxSize {
                offset: pos,
                type_code,
                size: extent,
            });
        }
        if extent > remaining {
            return Err(truncated(extent));
        }
        Ok(BoxHeader {
            size,
            type_code,
            large_size,
            user_type,
            offset: pos,
            extent,
        })
    }

    fn parse_box(&mut self, header: BoxHeader, depth: usize) -> Result<AtomNode, ParseError> {
        let code = header.type_code.0;
        if CONTAINER_BOXES.contains(&&code) {
            if depth >= MAX_DEPTH {
                self.warn(&header, "nesting too deep, kept opaque");
                return Ok(AtomNode::opaque(header));
            }
            let start = header.payload_offset();
            let children = self.parse_boxes(start, start + header.payload_len(), depth + 1)?;
            return Ok(AtomNode {
                header,
                fields: Vec::new(),
                children,
            });
        }
        if !has_schema(&header.type_code) {
            return Ok(AtomNode::opaque(header));
        }

        let read_len = header.payload_len().min(MAX_DECODE_BYTES);
        let mut payload = vec![0u8; read_len as usize];
        self.source.seek(SeekFrom::Start(header.payload_offset()))?;
        self.source.read_exact(&mut payload)?;
        let fields = match decode_known_box(&header, &payload) {
            Ok(fields) => fields,
            Err(e) => {
                self.warn(&header, &e.to_string());
                return Ok(AtomNode::opaque(header));
            }
        };

        // dref carries its data entries as child boxes after the entry count.
        let children = if header.type_code.is(b"dref") && depth < MAX_DEPTH {
            let start = header.payload_offset() + 8;
            let end = header.payload_offset() + header.payload_len();
            match self.parse_boxes(start, end, depth + 1) {
                Ok(children) => children,
                Err(ParseError::Io(e)) => return Err(ParseError::Io(e)),
                Err(e) => {
                    self.warn(&header, &format!("malformed data entries: {e}"));
                    Vec::new()
                }
            }
        } else {
            Vec::new()
        };

        Ok(AtomNode {
            header,
            fields,
            children,
        })
    }

    fn warn(&mut self, header: &BoxHeader, message: &str) {
        log::warn!(
            "{} at offset {}: {}",
            header.type_code,
            header.offset,
            message
        );
        self.warnings.push(ParseWarning {
            offset: header.offset,
            type_code: header.type_code,
            message: message.to_string(),
        });
    }
}
