//! Line-by-line port of the conlleval state machine (IOB tags, default
//! settings) and the fixtures it is compared on.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tagbench_core::eval::score;

pub fn split(tag: &str) -> (&str, &str) {
    if tag == "O" || tag == "null" {
        return ("O", "");
    }
    match tag.split_once('-') {
        Some((t, ty)) => (t, ty),
        None => (tag, ""),
    }
}

pub fn end_of_chunk(prev_tag: &str, tag: &str, prev_type: &str, ty: &str) -> bool {
    (prev_tag == "B" && tag == "B")
        || (prev_tag == "B" && tag == "O")
        || (prev_tag == "I" && tag == "B")
        || (prev_tag == "I" && tag == "O")
        || (prev_tag != "O" && prev_tag != "." && prev_type != ty)
}

pub fn start_of_chunk(prev_tag: &str, tag: &str, prev_type: &str, ty: &str) -> bool {
    (prev_tag == "B" && tag == "B")
        || (prev_tag == "I" && tag == "B")
        || (prev_tag == "O" && tag == "B")
        || (prev_tag == "O" && tag == "I")
        || (tag != "O" && tag != "." && prev_type != ty)
}

#[derive(Default)]
pub struct Tally {
    pub correct_chunk: usize,
    pub found_correct: usize,
    pub found_guessed: usize,
    pub correct_tags: usize,
    pub tokens: usize,
    pub per_type: BTreeMap<String, [usize; 3]>,
}

pub fn conlleval(gold: &[Vec<&str>], pred: &[Vec<&str>]) -> Tally {
    let mut t = Tally::default();
    // sentence boundaries are fed as an uncounted O/O line
    let mut lines: Vec<Option<(&str, &str)>> = Vec::new();
    for (g, p) in gold.iter().zip(pred) {
        for (a, b) in g.iter().zip(p) {
            lines.push(Some((a, b)));
        }
        lines.push(None);
    }
    let (mut last_c, mut last_g, mut last_ct, mut last_gt) = ("O", "O", "", "");
    let mut in_correct = false;
    let mut last_correct_type = String::new();
    for line in lines {
        let (c_raw, g_raw) = line.unwrap_or(("O", "O"));
        let (c, ct) = split(c_raw);
        let (g, gt) = split(g_raw);
        if in_correct {
            let ce = end_of_chunk(last_c, c, last_ct, ct);
            let ge = end_of_chunk(last_g, g, last_gt, gt);
            if ce && ge && last_gt == last_ct {
                in_correct = false;
                t.correct_chunk += 1;
                t.per_type.entry(last_correct_type.clone()).or_default()[0] += 1;
            } else if ce != ge || gt != ct {
                in_correct = false;
            }
        }
        let cs = start_of_chunk(last_c, c, last_ct, ct);
        let gs = start_of_chunk(last_g, g, last_gt, gt);
        if cs && gs && gt == ct {
            in_correct = true;
            last_correct_type = ct.to_string();
        }
        if cs {
            t.found_correct += 1;
            t.per_type.entry(ct.to_string()).or_default()[2] += 1;
        }
        if gs {
            t.found_guessed += 1;
            t.per_type.entry(gt.to_string()).or_default()[1] += 1;
        }
        if line.is_some() {
            if c == g && ct == gt {
                t.correct_tags += 1;
            }
            t.tokens += 1;
        }
        (last_c, last_g, last_ct, last_gt) = (c, g, ct, gt);
    }
    if in_correct {
        t.correct_chunk += 1;
        t.per_type.entry(last_correct_type).or_default()[0] += 1;
    }
    t
}

pub fn render(t: &Tally) -> String {
    let pct = |a: usize, b: usize| if b > 0 { 100.0 * a as f64 / b as f64 } else { 0.0 };
    let fb1 = |p: f64, r: f64| if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    let mut out = format!(
        "processed {} tokens with {} phrases; found: {} phrases; correct: {}.\n",
        t.tokens, t.found_correct, t.found_guessed, t.correct_chunk
    );
    if t.tokens > 0 {
        let p = pct(t.correct_chunk, t.found_guessed);
        let r = pct(t.correct_chunk, t.found_correct);
        out += &format!(
            "accuracy: {:6.2}%; precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}\n",
            pct(t.correct_tags, t.tokens),
            p,
            r,
            fb1(p, r)
        );
    }
    let types: BTreeSet<&String> = t.per_type.keys().collect();
    for ty in types {
        let [cc, fg, fc] = t.per_type[ty];
        let p = pct(cc, fg);
        let r = pct(cc, fc);
        out += &format!(
            "{:>17}: precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}  {}\n",
            ty,
            p,
            r,
            fb1(p, r),
            fg
        );
    }
    out
}

/// Compares `score` with the port: counts and the full rendered report.
pub fn check(gold: &[Vec<&str>], pred: &[Vec<&str>]) -> Result<(), String> {
    let oracle = conlleval(gold, pred);
    let report = score(gold, pred).map_err(|e| e.to_string())?;
    let ours = (report.overall.correct, report.overall.gold, report.overall.predicted, report.correct_tags);
    let theirs = (oracle.correct_chunk, oracle.found_correct, oracle.found_guessed, oracle.correct_tags);
    if ours != theirs {
        return Err(format!("{gold:?} / {pred:?}: counts {ours:?} vs {theirs:?}"));
    }
    let (a, b) = (report.to_conlleval(), render(&oracle));
    if a != b {
        return Err(format!("{gold:?} / {pred:?}: report\n{a}\nvs\n{b}"));
    }
    Ok(())
}

pub fn s(tags: &str) -> Vec<&str> {
    tags.split_whitespace().collect()
}

pub const FIXTURES: &[(&[&str], &[&str])] = &[
    (&["B-a I-a O"], &["B-a I-a O"]),
    (&["B-a I-a O"], &["B-a O O"]),
    (&["B-a I-a O"], &["B-a I-a I-a"]),
    (&["O I-a I-a"], &["O B-a I-a"]),
    (&["I-a O"], &["I-a O"]),
    (&["O I-a"], &["B-a I-a"]),
    (&["B-a I-b"], &["B-a B-b"]),
    (&["B-a I-b"], &["B-a I-b"]),
    (&["I-a I-b I-b"], &["B-a B-b I-b"]),
    (&["B-a B-a B-a"], &["B-a I-a I-a"]),
    (&["B-a I-a B-a"], &["B-a I-a I-a"]),
    (&["null B-a null"], &["O B-a O"]),
    (&["null null"], &["O O"]),
    (&["O O O"], &["B-x I-x O"]),
    (&["B-x I-x O"], &["O O O"]),
    (&["B-toloc.city_name I-toloc.city_name O B-depart_date.day_name"], &["B-toloc.city_name I-toloc.city_name O B-depart_date.day_name"]),
    (&["B-toloc.city_name I-toloc.city_name", "B-fromloc.city_name"], &["B-fromloc.city_name I-fromloc.city_name", "B-fromloc.city_name"]),
    (&["B-a", "I-a"], &["B-a", "B-a"]),
    (&["B-a I-a", "I-a O"], &["B-a I-a", "O O"]),
    (&["O B-a I-a I-a O B-b"], &["O B-a I-a O O B-b"]),
    (&["B-a O I-a"], &["B-a I-a I-a"]),
    (&["I-a B-a"], &["B-a B-a"]),
    (&["B-movie_name I-movie_name I-movie_name O B-year"], &["I-movie_name I-movie_name I-movie_name O I-year"]),
    (&["B-a I-a", "B-b I-b", "O"], &["B-a I-b", "B-b I-b", "I-c"]),
];

pub fn fixture(i: usize) -> (Vec<Vec<&'static str>>, Vec<Vec<&'static str>>) {
    let (g, p) = FIXTURES[i];
    (g.iter().map(|x| s(x)).collect(), p.iter().map(|x| s(x)).collect())
}

/// Random sentences over an alphabet with outside synonyms, orphan `I-`
/// tags and dotted concept names.
pub fn random_case(rng: &mut ChaCha8Rng) -> (Vec<Vec<&'static str>>, Vec<Vec<&'static str>>) {
    const ALPHABET: [&str; 8] = ["O", "null", "B-a", "I-a", "B-b", "I-b", "B-c.d", "I-c.d"];
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for _ in 0..rng.gen_range(1..4) {
        let n = rng.gen_range(1..7);
        gold.push((0..n).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect());
        pred.push((0..n).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect());
    }
    (gold, pred)
}
