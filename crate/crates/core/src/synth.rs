//! Deterministic synthetic BMFF corpora.
//!
//! Each device profile describes the container a phone would write; class
//! edits transform that container the way an editing tool or a sharing
//! platform would. Per-file variation is confined to fields the default
//! blacklist drops (times, durations, sample counts, opaque payload sizes),
//! so two native files of one profile yield identical symbol multisets.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::evaluation::{load_manifest, DatasetManifest, Os, Platform, Software};

/// A box to be serialized: a leaf with a raw payload, or a container whose
/// payload is its children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxBuilder {
    pub code: [u8; 4],
    pub payload: Vec<u8>,
    pub children: Vec<BoxBuilder>,
}

impl BoxBuilder {
    pub fn leaf(code: &[u8; 4], payload: Vec<u8>) -> Self {
        BoxBuilder {
            code: *code,
            payload,
            children: Vec::new(),
        }
    }

    pub fn container(code: &[u8; 4], children: Vec<BoxBuilder>) -> Self {
        BoxBuilder {
            code: *code,
            payload: Vec::new(),
            children,
        }
    }

    pub fn len(&self) -> usize {
        8 + self.payload.len() + self.children.iter().map(BoxBuilder::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty() && self.children.is_empty()
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.code);
        out.extend_from_slice(&self.payload);
        for child in &self.children {
            child.write_to(out);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len());
        self.write_to(&mut out);
        out
    }

    pub fn child(&self, code: &[u8; 4]) -> Option<&BoxBuilder> {
        self.children.iter().find(|c| &c.code == code)
    }

    pub fn child_mut(&mut self, code: &[u8; 4]) -> Option<&mut BoxBuilder> {
        self.children.iter_mut().find(|c| &c.code == code)
    }

    /// Returns the child with `code`, appending an empty container if absent.
    pub fn ensure_child(&mut self, code: &[u8; 4]) -> &mut BoxBuilder {
        let i = match self.children.iter().position(|c| &c.code == code) {
            Some(i) => i,
            None => {
                self.children.push(BoxBuilder::container(code, Vec::new()));
                self.children.len() - 1
            }
        };
        &mut self.children[i]
    }

    pub fn remove_children(&mut self, code: &[u8; 4]) {
        self.children.retain(|c| &c.code != code);
    }

    /// Handler type of a `trak`, read from `mdia/hdlr`.
    pub fn handler_type(&self) -> Option<[u8; 4]> {
        let hdlr = self.child(b"mdia")?.child(b"hdlr")?;
        hdlr.payload
            .get(8..12)
            .map(|b| b.try_into().expect("4 bytes"))
    }
}

/// Serializes top-level boxes into a file image.
pub fn file_bytes(boxes: &[BoxBuilder]) -> Vec<u8> {
    let mut out = Vec::new();
    for b in boxes {
        b.write_to(&mut out);
    }
    out
}

fn full_box(version: u8, flags: u32) -> Vec<u8> {
    let mut out = vec![version];
    out.extend_from_slice(&flags.to_be_bytes()[1..]);
    out
}

fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

const IDENTITY_MATRIX: [u32; 9] = [0x0001_0000, 0, 0, 0, 0x0001_0000, 0, 0, 0, 0x4000_0000];

fn put_matrix(out: &mut Vec<u8>) {
    for v in IDENTITY_MATRIX {
        put_u32(out, v);
    }
}

pub fn ftyp(major: &[u8; 4], minor: u32, compatible: &[[u8; 4]]) -> BoxBuilder {
    let mut p = major.to_vec();
    put_u32(&mut p, minor);
    for c in compatible {
        p.extend_from_slice(c);
    }
    BoxBuilder::leaf(b"ftyp", p)
}

/// Version-0 timing fields shared by `mvhd` and `mdhd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timing {
    pub creation: u32,
    pub modification: u32,
    pub timescale: u32,
    pub duration: u32,
}

pub fn mvhd(t: Timing, next_track_id: u32) -> BoxBuilder {
    let mut p = full_box(0, 0);
    for v in [t.creation, t.modification, t.timescale, t.duration] {
        put_u32(&mut p, v);
    }
    put_u32(&mut p, 0x0001_0000);
    put_u16(&mut p, 0x0100);
    p.extend_from_slice(&[0; 10]);
    put_matrix(&mut p);
    p.extend_from_slice(&[0; 24]);
    put_u32(&mut p, next_track_id);
    BoxBuilder::leaf(b"mvhd", p)
}

pub fn tkhd(t: Timing, track_id: u32, volume: u16, width: u32, height: u32) -> BoxBuilder {
    let mut p = full_box(0, 3);
    put_u32(&mut p, t.creation);
    put_u32(&mut p, t.modification);
    put_u32(&mut p, track_id);
    put_u32(&mut p, 0);
    put_u32(&mut p, t.duration);
    p.extend_from_slice(&[0; 8]);
    put_u16(&mut p, 0);
    put_u16(&mut p, 0);
    put_u16(&mut p, volume);
    put_u16(&mut p, 0);
    put_matrix(&mut p);
    put_u32(&mut p, width << 16);
    put_u32(&mut p, height << 16);
    BoxBuilder::leaf(b"tkhd", p)
}

pub fn mdhd(t: Timing) -> BoxBuilder {
    let mut p = full_box(0, 0);
    for v in [t.creation, t.modification, t.timescale, t.duration] {
        put_u32(&mut p, v);
    }
    // "und"
    put_u16(&mut p, 0x55c4);
    put_u16(&mut p, 0);
    BoxBuilder::leaf(b"mdhd", p)
}

pub fn hdlr(handler: &[u8; 4], name: &str) -> BoxBuilder {
    let mut p = full_box(0, 0);
    put_u32(&mut p, 0);
    p.extend_from_slice(handler);
    p.extend_from_slice(&[0; 12]);
    p.extend_from_slice(name.as_bytes());
    p.push(0);
    BoxBuilder::leaf(b"hdlr", p)
}

fn media_header(handler: &[u8; 4]) -> BoxBuilder {
    match handler {
        b"vide" => {
            let mut p = full_box(0, 1);
            p.extend_from_slice(&[0; 8]);
            BoxBuilder::leaf(b"vmhd", p)
        }
        b"soun" => {
            let mut p = full_box(0, 0);
            p.extend_from_slice(&[0; 4]);
            BoxBuilder::leaf(b"smhd", p)
        }
        _ => BoxBuilder::leaf(b"nmhd", full_box(0, 0)),
    }
}

fn dinf() -> BoxBuilder {
    let mut p = full_box(0, 0);
    put_u32(&mut p, 1);
    BoxBuilder::container(
        b"dinf",
        vec![BoxBuilder {
            code: *b"dref",
            payload: p,
            children: vec![BoxBuilder::leaf(b"url ", full_box(0, 1))],
        }],
    )
}

fn stbl(format: &[u8; 4], samples: u32, delta: u32, rng: &mut ChaCha8Rng) -> BoxBuilder {
    let mut stsd = full_box(0, 0);
    put_u32(&mut stsd, 1);
    put_u32(&mut stsd, 16);
    stsd.extend_from_slice(format);
    stsd.extend_from_slice(&[0; 6]);
    put_u16(&mut stsd, 1);

    let mut stts = full_box(0, 0);
    put_u32(&mut stts, 1);
    put_u32(&mut stts, samples);
    put_u32(&mut stts, delta);

    let mut stsc = full_box(0, 0);
    put_u32(&mut stsc, 1);
    for v in [1, samples, 1] {
        put_u32(&mut stsc, v);
    }

    let mut stsz = full_box(0, 0);
    put_u32(&mut stsz, 0);
    put_u32(&mut stsz, samples);
    for _ in 0..samples {
        put_u32(&mut stsz, rng.gen_range(64..4096));
    }

    let mut stco = full_box(0, 0);
    put_u32(&mut stco, 1);
    put_u32(&mut stco, 48);

    BoxBuilder::container(
        b"stbl",
        vec![
            BoxBuilder::leaf(b"stsd", stsd),
            BoxBuilder::leaf(b"stts", stts),
            BoxBuilder::leaf(b"stsc", stsc),
            BoxBuilder::leaf(b"stsz", stsz),
            BoxBuilder::leaf(b"stco", stco),
        ],
    )
}

pub fn edts(segment_duration: u32, media_time: i32) -> BoxBuilder {
    let mut p = full_box(0, 0);
    put_u32(&mut p, 1);
    put_u32(&mut p, segment_duration);
    p.extend_from_slice(&media_time.to_be_bytes());
    put_u32(&mut p, 0x0001_0000);
    BoxBuilder::container(b"edts", vec![BoxBuilder::leaf(b"elst", p)])
}

/// Opaque leaf whose payload is `len` random bytes.
fn opaque(code: &[u8; 4], len: usize, rng: &mut ChaCha8Rng) -> BoxBuilder {
    let mut p = vec![0; len];
    rng.fill(&mut p[..]);
    BoxBuilder::leaf(code, p)
}

/// One track of a profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackSpec {
    pub handler: [u8; 4],
    pub handler_name: String,
    pub format: [u8; 4],
    pub timescale: u32,
    pub width: u32,
    pub height: u32,
}

/// Container layout written by one acquisition device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceProfile {
    pub id: String,
    pub os: Os,
    pub major_brand: [u8; 4],
    pub minor_version: u32,
    pub compatible: Vec<[u8; 4]>,
    /// Top-level boxes written before `mdat` besides `ftyp` (e.g. `wide`).
    pub preamble: Vec<[u8; 4]>,
    /// Whether `moov` follows `mdat`.
    pub moov_last: bool,
    pub movie_timescale: u32,
    pub tracks: Vec<TrackSpec>,
    /// Edit list media time for the first track, if the device writes one.
    pub edit_media_time: Option<i32>,
    /// `(atom, minimum payload length)` entries of `moov/udta`.
    pub udta: Vec<([u8; 4], usize)>,
}

fn track(
    handler: &[u8; 4],
    name: &str,
    format: &[u8; 4],
    timescale: u32,
    size: (u32, u32),
) -> TrackSpec {
    TrackSpec {
        handler: *handler,
        handler_name: name.to_string(),
        format: *format,
        timescale,
        width: size.0,
        height: size.1,
    }
}

/// Three iOS-like and three Android-like profiles. iOS devices share a `qt`
/// brand, HEVC video and a timed-metadata track; Android devices share an
/// `mp42` brand and AVC video. Each profile has `udta` atoms of its own.
pub fn default_profiles() -> Vec<DeviceProfile> {
    let ios =
        |id: &str, udta: Vec<([u8; 4], usize)>, media_time: i32, size: (u32, u32)| DeviceProfile {
            id: id.to_string(),
            os: Os::Ios,
            major_brand: *b"qt  ",
            minor_version: 0,
            compatible: vec![*b"qt  "],
            preamble: vec![*b"wide"],
            moov_last: true,
            movie_timescale: 600,
            tracks: vec![
                track(b"vide", "Core Media Video", b"hvc1", 600, size),
                track(b"soun", "Core Media Audio", b"mp4a", 44100, (0, 0)),
                track(b"meta", "Core Media Metadata", b"mebx", 600, (0, 0)),
            ],
            edit_media_time: Some(media_time),
            udta,
        };
    let android = |id: &str,
                   udta: Vec<([u8; 4], usize)>,
                   compatible: Vec<[u8; 4]>,
                   size: (u32, u32)| DeviceProfile {
        id: id.to_string(),
        os: Os::Android,
        major_brand: *b"mp42",
        minor_version: 0,
        compatible,
        preamble: vec![],
        moov_last: false,
        movie_timescale: 1000,
        tracks: vec![
            track(b"vide", "VideoHandle", b"avc1", 90000, size),
            track(b"soun", "SoundHandle", b"mp4a", 48000, (0, 0)),
        ],
        edit_media_time: None,
        udta,
    };
    vec![
        ios(
            "D01",
            vec![
                (*b"\xa9mak", 9),
                (*b"\xa9mod", 13),
                (*b"\xa9swr", 6),
                (*b"\xa9xyz", 18),
            ],
            0,
            (1920, 1080),
        ),
        ios(
            "D02",
            vec![
                (*b"\xa9mak", 9),
                (*b"\xa9mod", 13),
                (*b"\xa9swr", 6),
                (*b"\xa9day", 24),
            ],
            1200,
            (3840, 2160),
        ),
        ios(
            "D03",
            vec![
                (*b"\xa9mak", 9),
                (*b"\xa9mod", 10),
                (*b"\xa9xyz", 18),
                (*b"\xa9too", 8),
            ],
            0,
            (1280, 720),
        ),
        android(
            "D04",
            vec![(*b"smrd", 8), (*b"smta", 12), (*b"\xa9xyz", 18)],
            vec![*b"isom", *b"mp42"],
            (1920, 1080),
        ),
        android(
            "D05",
            vec![(*b"\xa9xyz", 18)],
            vec![*b"isom", *b"mp42"],
            (1920, 1080),
        ),
        android(
            "D06",
            vec![(*b"meta", 40), (*b"auth", 16)],
            vec![*b"isom", *b"mp42", *b"mp41"],
            (1280, 720),
        ),
    ]
}

/// Transformation applied to a native container.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassEdit {
    Native,
    /// Metadata rewrite: adds an XMP packet under `moov/udta`.
    Exiftool,
    /// Remux: new brand, vendor atoms dropped, handler names rewritten, data
    /// tracks dropped, encoder tag added.
    Ffmpeg,
    /// Re-encode by a sharing platform into a fixed fragmented layout.
    Platform(Platform),
}

impl ClassEdit {
    pub fn software(self) -> Software {
        match self {
            ClassEdit::Exiftool => Software::Exiftool,
            ClassEdit::Ffmpeg => Software::Ffmpeg,
            ClassEdit::Native | ClassEdit::Platform(_) => Software::None,
        }
    }

    pub fn platform(self) -> Platform {
        match self {
            ClassEdit::Platform(p) => p,
            _ => Platform::None,
        }
    }

    pub fn tag(self) -> String {
        match self {
            ClassEdit::Platform(p) => p.as_str().to_string(),
            other => other.software().os_suffix().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureSpec {
    pub seed: u64,
    pub profiles: Vec<DeviceProfile>,
    pub classes: Vec<ClassEdit>,
    pub videos_per_cell: usize,
}

impl FixtureSpec {
    /// Six profiles, four classes, four videos per cell.
    pub fn desk_scale(seed: u64) -> Self {
        FixtureSpec {
            seed,
            profiles: default_profiles(),
            classes: vec![
                ClassEdit::Native,
                ClassEdit::Exiftool,
                ClassEdit::Ffmpeg,
                ClassEdit::Platform(Platform::Youtube),
            ],
            videos_per_cell: 4,
        }
    }
}

/// The top-level boxes of a native recording.
pub fn native_container(profile: &DeviceProfile, rng: &mut ChaCha8Rng) -> Vec<BoxBuilder> {
    let creation = rng.gen_range(3_600_000_000..3_800_000_000u32);
    let seconds = rng.gen_range(2..60u32);
    let movie = Timing {
        creation,
        modification: creation + rng.gen_range(0..3),
        timescale: profile.movie_timescale,
        duration: seconds * profile.movie_timescale,
    };
    let mut moov = vec![mvhd(movie, profile.tracks.len() as u32 + 1)];
    for (i, t) in profile.tracks.iter().enumerate() {
        let media = Timing {
            timescale: t.timescale,
            duration: seconds * t.timescale,
            ..movie
        };
        let samples = rng.gen_range(8..40u32);
        let volume = if t.handler == *b"soun" { 0x0100 } else { 0 };
        let mut trak = vec![tkhd(movie, i as u32 + 1, volume, t.width, t.height)];
        if let (0, Some(media_time)) = (i, profile.edit_media_time) {
            trak.push(edts(movie.duration, media_time));
        }
        trak.push(BoxBuilder::container(
            b"mdia",
            vec![
                mdhd(media),
                hdlr(&t.handler, &t.handler_name),
                BoxBuilder::container(
                    b"minf",
                    vec![
                        media_header(&t.handler),
                        dinf(),
                        stbl(&t.format, samples, media.duration / samples, rng),
                    ],
                ),
            ],
        ));
        moov.push(BoxBuilder::container(b"trak", trak));
    }
    if !profile.udta.is_empty() {
        let atoms = profile
            .udta
            .iter()
            .map(|(code, len)| opaque(code, len + rng.gen_range(0..4), rng))
            .collect();
        moov.push(BoxBuilder::container(b"udta", atoms));
    }

    let mut boxes = vec![ftyp(
        &profile.major_brand,
        profile.minor_version,
        &profile.compatible,
    )];
    for code in &profile.preamble {
        boxes.push(BoxBuilder::leaf(code, Vec::new()));
    }
    let mdat = opaque(b"mdat", rng.gen_range(256..2048), rng);
    let moov = BoxBuilder::container(b"moov", moov);
    if profile.moov_last {
        boxes.extend([mdat, moov]);
    } else {
        boxes.extend([moov, mdat]);
    }
    boxes
}

fn rewrite_handler_name(trak: &mut BoxBuilder, name: &str) {
    let Some(handler) = trak.handler_type() else {
        return;
    };
    if let Some(slot) = trak
        .child_mut(b"mdia")
        .and_then(|m| m.children.iter_mut().find(|c| &c.code == b"hdlr"))
    {
        *slot = hdlr(&handler, name);
    }
}

/// Applies `edit` to a native container of `profile`.
pub fn apply_edit(
    edit: ClassEdit,
    boxes: Vec<BoxBuilder>,
    profile: &DeviceProfile,
    rng: &mut ChaCha8Rng,
) -> Vec<BoxBuilder> {
    match edit {
        ClassEdit::Native => boxes,
        ClassEdit::Exiftool => {
            let mut boxes = boxes;
            let moov = boxes
                .iter_mut()
                .find(|b| &b.code == b"moov")
                .expect("native has moov");
            let xmp = opaque(b"XMP_", 3000 + rng.gen_range(0..200), rng);
            moov.ensure_child(b"udta").children.push(xmp);
            boxes
        }
        ClassEdit::Ffmpeg => {
            let mut moov = boxes
                .into_iter()
                .find(|b| &b.code == b"moov")
                .expect("native has moov");
            moov.children
                .retain(|c| c.code != *b"trak" || c.handler_type() != Some(*b"meta"));
            moov.remove_children(b"udta");
            for trak in moov.children.iter_mut().filter(|c| &c.code == b"trak") {
                let name = match trak.handler_type() {
                    Some(h) if &h == b"soun" => "SoundHandler",
                    _ => "VideoHandler",
                };
                rewrite_handler_name(trak, name);
            }
            let tracks = moov.children.iter().filter(|c| &c.code == b"trak").count() as u32;
            if let Some(m) = moov.children.iter_mut().find(|c| &c.code == b"mvhd") {
                // nextTrackId sits in the last four bytes.
                let n = m.payload.len();
                m.payload[n - 4..].copy_from_slice(&(tracks + 1).to_be_bytes());
            }
            moov.children.push(BoxBuilder::container(
                b"udta",
                vec![BoxBuilder::leaf(b"meta", b"Lavf58.76.100".to_vec())],
            ));
            let brands = [*b"isom", *b"iso2", *b"mp41"];
            vec![
                ftyp(b"isom", 512, &brands),
                BoxBuilder::leaf(b"free", Vec::new()),
                opaque(b"mdat", rng.gen_range(256..2048), rng),
                moov,
            ]
        }
        ClassEdit::Platform(_) => platform_container(profile, rng),
    }
}

/// Layout of a platform re-encode; independent of the source device.
fn platform_container(_profile: &DeviceProfile, rng: &mut ChaCha8Rng) -> Vec<BoxBuilder> {
    let creation = 0;
    let seconds = rng.gen_range(2..60u32);
    let movie = Timing {
        creation,
        modification: creation,
        timescale: 1000,
        duration: seconds * 1000,
    };
    let media = Timing {
        timescale: 15360,
        duration: seconds * 15360,
        ..movie
    };
    let samples = rng.gen_range(8..40u32);
    let trak = BoxBuilder::container(
        b"trak",
        vec![
            tkhd(movie, 1, 0, 1280, 720),
            BoxBuilder::container(
                b"mdia",
                vec![
                    mdhd(media),
                    hdlr(b"vide", "ISO Media file produced by Google Inc."),
                    BoxBuilder::container(
                        b"minf",
                        vec![
                            media_header(b"vide"),
                            dinf(),
                            stbl(b"avc1", samples, media.duration / samples, rng),
                        ],
                    ),
                ],
            ),
        ],
    );
    let mut trex = full_box(0, 0);
    for v in [1, 1, 0, 0, 0] {
        put_u32(&mut trex, v);
    }
    let moov = BoxBuilder::container(
        b"moov",
        vec![
            mvhd(movie, 2),
            trak,
            BoxBuilder::container(b"mvex", vec![BoxBuilder::leaf(b"trex", trex)]),
        ],
    );
    vec![
        ftyp(b"dash", 0, &[*b"iso6", *b"avc1", *b"mp41"]),
        moov,
        opaque(b"mdat", rng.gen_range(256..2048), rng),
    ]
}

/// File name of video `index` of a profile and class.
pub fn fixture_name(profile: &DeviceProfile, edit: ClassEdit, index: usize) -> String {
    format!("{}_{}_{index:02}.mp4", profile.id, edit.tag())
}

/// Writes every file of `spec` and a `manifest.csv` into `out_dir` and
/// returns the loaded manifest.
pub fn generate_corpus(spec: &FixtureSpec, out_dir: &Path) -> io::Result<DatasetManifest> {
    fs::create_dir_all(out_dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut csv = String::from("file,device,os,software,platform\n");
    for profile in &spec.profiles {
        for &edit in &spec.classes {
            for i in 0..spec.videos_per_cell {
                let native = native_container(profile, &mut rng);
                let boxes = apply_edit(edit, native, profile, &mut rng);
                let name = fixture_name(profile, edit, i);
                fs::write(out_dir.join(&name), file_bytes(&boxes))?;
                csv.push_str(&format!(
                    "{name},{},{},{},{}\n",
                    profile.id,
                    profile.os,
                    edit.software(),
                    edit.platform()
                ));
            }
        }
    }
    let manifest_path = out_dir.join("manifest.csv");
    fs::write(&manifest_path, csv)?;
    load_manifest(&manifest_path)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
}
