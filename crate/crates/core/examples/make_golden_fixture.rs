//! Regenerates the field-tagged golden corpus under `tests/fixtures`.
//!
//! The corpus plants known citation counts for a set of historical works
//! among noise references, post-cutoff references, undated references and a
//! few non-article records. Output is fully determined by the seed.
//!
//!     cargo run -p refspect-core --example make_golden_fixture

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RECORDS: usize = 1000;

/// (raw reference, number of distinct article records citing it)
const PLANTED: &[(&str, usize)] = &[
    ("HALLEY E, 1686, PHILOS T R SOC LOND, V16, P153", 14),
    ("LINNAEUS C, 1735, SYSTEMA NATURAE", 11),
    ("MALTHUS TR, 1798, ESSAY PRINCIPLE POPU", 13),
    ("SAUSSURE HB, 1779, VOYAGES ALPES", 12),
    ("FOURIER J, 1824, ANN CHIM PHYS, V27, P136", 8),
    ("FOURIER J, 1924, ANN CHIM PHYS, V27, P136", 17),
    ("POUILLET CSM, 1838, CR HEBD ACAD SCI, V7, P24", 9),
    ("DARWIN C, 1859, ORIGIN SPECIES", 16),
    ("TYNDALL J, 1861, PHILOS MAG, V22, P169", 40),
    ("ARRHENIUS S, 1896, PHILOS MAG, V41, P237", 279),
    ("ARRHENIUS S, 1896, LONDON EDINBURGH DUBL, V41, P237", 32),
    ("CHAMBERLIN TC, 1899, J GEOL, V7, P545", 25),
    ("CALLENDAR GS, 1938, Q J ROY METEOR SOC, V64, P223", 150),
    ("JENNY H, 1941, FACTORS SOIL FORMATION", 354),
    ("MILANKOVITCH M, 1941, KANON ERDBESTRAHLUNG", 352),
    ("REVELLE R, 1957, TELLUS, V9, P18", 200),
    ("KEELING CD, 1960, TELLUS, V12, P200", 120),
    ("DANSGAARD W, 1964, TELLUS, V16, P436", 180),
    ("HARDIN G, 1968, SCIENCE, V162, P1243", 90),
    ("NASH JE, 1970, J HYDROL, V10, P282", 130),
];

const LATER: &[&str] = &[
    "HANSEN J, 1988, J GEOPHYS RES-ATMOS, V93, P9341",
    "IPCC, 2007, CLIMATE CHANGE 2007 PHYS",
    "MANN ME, 1998, NATURE, V392, P779",
    "PETIT JR, 1999, NATURE, V399, P429",
    "LE TREUT H, 2007, CLIMATE CHANGE 2007 PHYS, P93",
];

const UNDATED: &[&str] = &["ANONYMOUS, CLIMATE DATA ARCH", "NOAA, GLOBAL SURFACE TEMPERA", "[ANONYMOUS], UNPUB"];

fn noise_reference(rng: &mut ChaCha8Rng) -> String {
    let letters = b"ABCDEFGHIJKLMNOPRSTUVWZ";
    let mut author = String::new();
    for _ in 0..rng.gen_range(5..10) {
        author.push(letters[rng.gen_range(0..letters.len())] as char);
    }
    let year = rng.gen_range(1686..=1970);
    let journals = ["J ATMOS SCI", "NATURE", "SCIENCE", "TELLUS", "Q J ROY METEOR SOC", "MON WEATHER REV", "ANN PHYS-BERLIN"];
    let journal = journals[rng.gen_range(0..journals.len())];
    format!(
        "{} {}, {}, {}, V{}, P{}",
        author,
        letters[rng.gen_range(0..letters.len())] as char,
        year,
        journal,
        rng.gen_range(1..200),
        rng.gen_range(1..900)
    )
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1896);
    let mut refs: Vec<Vec<String>> = vec![Vec::new(); RECORDS];

    for (raw, count) in PLANTED {
        // The two Arrhenius variants go to disjoint record sets.
        let pool: Vec<usize> = if raw.contains("LONDON EDINBURGH DUBL") {
            let main = "ARRHENIUS S, 1896, PHILOS MAG, V41, P237";
            (0..RECORDS).filter(|&i| !refs[i].iter().any(|r| r == main)).collect()
        } else {
            (0..RECORDS).collect()
        };
        for &i in pool.choose_multiple(&mut rng, *count) {
            refs[i].push(raw.to_string());
        }
    }
    let mut noise_pool: Vec<String> = (0..600).map(|_| noise_reference(&mut rng)).collect();
    noise_pool.sort();
    noise_pool.dedup();
    // Noise stays below every era threshold.
    let mut used = vec![0u32; noise_pool.len()];
    for record in refs.iter_mut() {
        for _ in 0..rng.gen_range(0..4) {
            let k = rng.gen_range(0..noise_pool.len());
            if used[k] < 6 {
                used[k] += 1;
                record.push(noise_pool[k].clone());
            }
        }
        if rng.gen_bool(0.5) {
            record.push(LATER[rng.gen_range(0..LATER.len())].to_string());
        }
        if rng.gen_bool(0.05) {
            record.push(UNDATED[rng.gen_range(0..UNDATED.len())].to_string());
        }
        record.shuffle(&mut rng);
    }

    let mut out = String::from("FN Clarivate Analytics Web of Science\nVR 1.0\n");
    let write_record = |out: &mut String, id: &str, dt: &str, py: i32, cited: &[String]| {
        writeln!(out, "PT J").unwrap();
        writeln!(out, "DT {dt}").unwrap();
        for (k, r) in cited.iter().enumerate() {
            let tag = if k == 0 { "CR " } else { "   " };
            writeln!(out, "{tag}{r}").unwrap();
        }
        writeln!(out, "PY {py}").unwrap();
        writeln!(out, "UT {id}").unwrap();
        writeln!(out, "ER\n").unwrap();
    };
    for (i, cited) in refs.iter().enumerate() {
        let dt = if i % 9 == 4 { "Review" } else { "Article" };
        let py = rng.gen_range(1980..=2014);
        write_record(&mut out, &format!("WOS:{:012}", i + 1), dt, py, cited);
    }
    // Outside the default document types: these citations never count.
    for j in 0..6 {
        let cited = vec![
            "REVELLE R, 1957, TELLUS, V9, P18".to_string(),
            "ARRHENIUS S, 1896, PHILOS MAG, V41, P237".to_string(),
        ];
        write_record(&mut out, &format!("WOS:{:012}", 900_001 + j), "Editorial Material", 2010, &cited);
    }
    // Skipped with a diagnostic: no publication year.
    out.push_str("PT J\nDT Article\nCR CALLENDAR GS, 1938, Q J ROY METEOR SOC, V64, P223\nUT WOS:999999999999\nER\n\n");
    out.push_str("EF\n");

    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::write(dir.join("golden_corpus.txt"), out).unwrap();
    eprintln!("wrote {}", dir.join("golden_corpus.txt").display());
}
