//! MovieLens-style interaction data: loaders, binary labels, per-user
//! persona statistics and the train/test/new split.
//!
//! Supported layouts:
//! - `ml-100k`: `u.data` (tab separated), `u.user`, `u.item`, `u.genre` (`|`).
//! - `ml-1m`: `ratings.dat`, `users.dat`, `movies.dat` (`::` separated).
//! - `csv`: `users.csv` (`user_id,age,gender,occupation,zip`), `items.csv`
//!   (`item_id,title,year,genres` with `|`-joined genre names and an empty
//!   year when unknown), `ratings.csv` (`user_id,item_id,rating,timestamp`).
//!   Each file has a header row.
//! - `canonical`: the single-file text form written by
//!   [`RawDataset::to_canonical`].

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CANONICAL_MAGIC: &str = "# edgecast-dataset v1";

/// Genre list of the ml-1m release, in `movies.dat` spelling.
const ML1M_GENRES: [&str; 18] = [
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    #[serde(rename = "ml-100k")]
    Ml100k,
    #[serde(rename = "ml-1m")]
    Ml1m,
    Csv,
    Canonical,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ml-100k" => Ok(DatasetFormat::Ml100k),
            "ml-1m" => Ok(DatasetFormat::Ml1m),
            "csv" => Ok(DatasetFormat::Csv),
            "canonical" => Ok(DatasetFormat::Canonical),
            other => Err(Error::Domain(format!("unknown dataset format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: u32,
    pub age: u32,
    pub gender: String,
    pub occupation: String,
    pub zip: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: u32,
    pub title: String,
    pub year: Option<u32>,
    /// One flag per entry of [`RawDataset::genres`].
    pub genres: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rating {
    pub user: u32,
    pub item: u32,
    pub rating: u8,
    pub timestamp: i64,
}

/// Users and items sorted by id, ratings sorted by `(user, item)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawDataset {
    pub genres: Vec<String>,
    pub users: Vec<User>,
    pub items: Vec<Item>,
    pub ratings: Vec<Rating>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledInteraction {
    pub user: u32,
    pub item: u32,
    pub label: u8,
}

/// Per-user rating statistics used as dense user features.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Persona {
    pub count: f64,
    pub mean_rating: f64,
    /// Fraction of the user's rated items carrying each genre.
    pub genre_fractions: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitOptions {
    pub train_fraction: f64,
    pub seed: u64,
    /// Unwatched items sampled per user for the "new" set.
    pub new_per_user: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub train: Vec<LabeledInteraction>,
    pub test: Vec<LabeledInteraction>,
    /// Unlabeled `(user, item)` pairs outside the user's rating history.
    pub new: Vec<(u32, u32)>,
}

impl RawDataset {
    pub fn user(&self, id: u32) -> Option<&User> {
        self.users
            .binary_search_by_key(&id, |u| u.id)
            .ok()
            .map(|i| &self.users[i])
    }

    pub fn item(&self, id: u32) -> Option<&Item> {
        self.items
            .binary_search_by_key(&id, |it| it.id)
            .ok()
            .map(|i| &self.items[i])
    }

    /// Sorts all tables and checks ids, genre widths and rating uniqueness.
    pub fn finalize(mut self) -> Result<Self> {
        self.users.sort_by_key(|u| u.id);
        self.items.sort_by_key(|i| i.id);
        self.ratings.sort_by_key(|r| (r.user, r.item));
        if let Some(w) = self.users.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Integrity(format!("duplicate user id {}", w[0].id)));
        }
        if let Some(w) = self.items.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Integrity(format!("duplicate item id {}", w[0].id)));
        }
        if let Some(it) = self.items.iter().find(|it| it.genres.len() != self.genres.len()) {
            return Err(Error::Integrity(format!(
                "item {} has {} genre flags, expected {}",
                it.id,
                it.genres.len(),
                self.genres.len()
            )));
        }
        if let Some(w) = self
            .ratings
            .windows(2)
            .find(|w| (w[0].user, w[0].item) == (w[1].user, w[1].item))
        {
            return Err(Error::Integrity(format!(
                "user {} rated item {} more than once",
                w[0].user, w[0].item
            )));
        }
        for r in &self.ratings {
            if self.user(r.user).is_none() {
                return Err(Error::Integrity(format!("rating references unknown user {}", r.user)));
            }
            if self.item(r.item).is_none() {
                return Err(Error::Integrity(format!("rating references unknown item {}", r.item)));
            }
        }
        Ok(self)
    }

    /// Versioned, self-describing text serialization. Identical datasets
    /// serialize to identical bytes.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{CANONICAL_MAGIC} genres={} users={} items={} ratings={}",
            self.genres.len(),
            self.users.len(),
            self.items.len(),
            self.ratings.len()
        );
        out.push_str("# genre\tname\n");
        out.push_str("# user\tid\tage\tgender\toccupation\tzip\n");
        out.push_str("# item\tid\tyear|-\tgenre-flags\ttitle\n");
        out.push_str("# rating\tuser\titem\trating\ttimestamp\n");
        for g in &self.genres {
            let _ = writeln!(out, "genre\t{}", clean(g));
        }
        for u in &self.users {
            let _ = writeln!(
                out,
                "user\t{}\t{}\t{}\t{}\t{}",
                u.id,
                u.age,
                clean(&u.gender),
                clean(&u.occupation),
                clean(&u.zip)
            );
        }
        for it in &self.items {
            let year = it.year.map_or("-".to_string(), |y| y.to_string());
            let flags: String = it.genres.iter().map(|&g| if g { '1' } else { '0' }).collect();
            let _ = writeln!(out, "item\t{}\t{}\t{}\t{}", it.id, year, flags, clean(&it.title));
        }
        for r in &self.ratings {
            let _ = writeln!(out, "rating\t{}\t{}\t{}\t{}", r.user, r.item, r.rating, r.timestamp);
        }
        out
    }

    pub fn write_canonical(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_canonical()).map_err(|e| Error::io(path, e))
    }
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Loads a dataset directory (or canonical file) and checks referential
/// integrity.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<RawDataset> {
    let ds = match format {
        DatasetFormat::Ml100k => load_ml100k(path)?,
        DatasetFormat::Ml1m => load_ml1m(path)?,
        DatasetFormat::Csv => load_csv(path)?,
        DatasetFormat::Canonical => load_canonical(path)?,
    };
    ds.finalize()
}

/// Files are decoded as Latin-1, which every MovieLens release is valid in.
fn read_latin1(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(bytes.iter().map(|&b| b as char).collect())
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn field<T: FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("bad {name} '{raw}'")))
}

fn columns<'a>(path: &Path, line: usize, text: &'a str, sep: &str, n: usize) -> Result<Vec<&'a str>> {
    let cols: Vec<&str> = text.split(sep).collect();
    if cols.len() < n {
        return Err(Error::parse(
            path,
            line,
            format!("expected {n} fields, found {}", cols.len()),
        ));
    }
    Ok(cols)
}

fn parse_rating(path: &Path, line: usize, cols: &[&str]) -> Result<Rating> {
    let rating: u8 = field(path, line, "rating", cols[2])?;
    if !(1..=5).contains(&rating) {
        return Err(Error::parse(path, line, format!("rating {rating} outside 1..=5")));
    }
    Ok(Rating {
        user: field(path, line, "user id", cols[0])?,
        item: field(path, line, "item id", cols[1])?,
        rating,
        timestamp: field(path, line, "timestamp", cols[3])?,
    })
}

fn year_from_title(title: &str) -> Option<u32> {
    let t = title.trim_end();
    let inner = t.strip_suffix(')')?;
    let open = inner.rfind('(')?;
    inner[open + 1..].parse().ok()
}

fn load_ml100k(dir: &Path) -> Result<RawDataset> {
    let genre_path = dir.join("u.genre");
    let mut genres = Vec::new();
    for (ln, l) in lines(&read_latin1(&genre_path)?) {
        let cols = columns(&genre_path, ln, l, "|", 2)?;
        let idx: usize = field(&genre_path, ln, "genre index", cols[1])?;
        if idx != genres.len() {
            return Err(Error::parse(&genre_path, ln, "genre indices must be 0,1,2,..."));
        }
        genres.push(cols[0].to_string());
    }

    let user_path = dir.join("u.user");
    let mut users = Vec::new();
    for (ln, l) in lines(&read_latin1(&user_path)?) {
        let cols = columns(&user_path, ln, l, "|", 5)?;
        users.push(User {
            id: field(&user_path, ln, "user id", cols[0])?,
            age: field(&user_path, ln, "age", cols[1])?,
            gender: cols[2].to_string(),
            occupation: cols[3].to_string(),
            zip: cols[4].to_string(),
        });
    }

    let item_path = dir.join("u.item");
    let mut items = Vec::new();
    for (ln, l) in lines(&read_latin1(&item_path)?) {
        let cols = columns(&item_path, ln, l, "|", 5 + genres.len())?;
        let flags = &cols[cols.len() - genres.len()..];
        let genre_flags = flags
            .iter()
            .map(|f| match f.trim() {
                "1" => Ok(true),
                "0" => Ok(false),
                other => Err(Error::parse(&item_path, ln, format!("bad genre flag '{other}'"))),
            })
            .collect::<Result<_>>()?;
        // Release date is dd-Mon-yyyy; fall back to the year in the title.
        let year = cols[2]
            .rsplit('-')
            .next()
            .and_then(|y| y.parse().ok())
            .or_else(|| year_from_title(cols[1]));
        items.push(Item {
            id: field(&item_path, ln, "item id", cols[0])?,
            title: cols[1].to_string(),
            year,
            genres: genre_flags,
        });
    }

    let rating_path = dir.join("u.data");
    let mut ratings = Vec::new();
    for (ln, l) in lines(&read_latin1(&rating_path)?) {
        let cols = columns(&rating_path, ln, l, "\t", 4)?;
        ratings.push(parse_rating(&rating_path, ln, &cols)?);
    }
    Ok(RawDataset {
        genres,
        users,
        items,
        ratings,
    })
}

fn load_ml1m(dir: &Path) -> Result<RawDataset> {
    let genres: Vec<String> = ML1M_GENRES.iter().map(|g| g.to_string()).collect();

    let user_path = dir.join("users.dat");
    let mut users = Vec::new();
    for (ln, l) in lines(&read_latin1(&user_path)?) {
        let cols = columns(&user_path, ln, l, "::", 5)?;
        users.push(User {
            id: field(&user_path, ln, "user id", cols[0])?,
            gender: cols[1].to_string(),
            age: field(&user_path, ln, "age", cols[2])?,
            occupation: cols[3].to_string(),
            zip: cols[4].to_string(),
        });
    }

    let item_path = dir.join("movies.dat");
    let mut items = Vec::new();
    for (ln, l) in lines(&read_latin1(&item_path)?) {
        let cols = columns(&item_path, ln, l, "::", 3)?;
        let mut flags = vec![false; genres.len()];
        for name in cols[2].split('|').filter(|s| !s.is_empty()) {
            let k = genres
                .iter()
                .position(|g| g == name)
                .ok_or_else(|| Error::parse(&item_path, ln, format!("unknown genre '{name}'")))?;
            flags[k] = true;
        }
        items.push(Item {
            id: field(&item_path, ln, "item id", cols[0])?,
            title: cols[1].to_string(),
            year: year_from_title(cols[1]),
            genres: flags,
        });
    }

    let rating_path = dir.join("ratings.dat");
    let mut ratings = Vec::new();
    for (ln, l) in lines(&read_latin1(&rating_path)?) {
        let cols = columns(&rating_path, ln, l, "::", 4)?;
        ratings.push(parse_rating(&rating_path, ln, &cols)?);
    }
    Ok(RawDataset {
        genres,
        users,
        items,
        ratings,
    })
}

fn csv_records(path: &Path, width: usize) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() < width {
            return Err(Error::parse(
                path,
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        rows.push((line, rec));
    }
    Ok(rows)
}

fn load_csv(dir: &Path) -> Result<RawDataset> {
    let user_path = dir.join("users.csv");
    let mut users = Vec::new();
    for (ln, r) in csv_records(&user_path, 5)? {
        users.push(User {
            id: field(&user_path, ln, "user id", &r[0])?,
            age: field(&user_path, ln, "age", &r[1])?,
            gender: r[2].to_string(),
            occupation: r[3].to_string(),
            zip: r[4].to_string(),
        });
    }

    let item_path = dir.join("items.csv");
    let rows = csv_records(&item_path, 4)?;
    let names: BTreeSet<&str> = rows
        .iter()
        .flat_map(|(_, r)| r.get(3).unwrap_or("").split('|'))
        .filter(|s| !s.is_empty())
        .collect();
    let genres: Vec<String> = names.into_iter().map(String::from).collect();
    let mut items = Vec::new();
    for (ln, r) in &rows {
        let mut flags = vec![false; genres.len()];
        for name in r[3].split('|').filter(|s| !s.is_empty()) {
            flags[genres.iter().position(|g| g == name).unwrap()] = true;
        }
        let year = if r[2].trim().is_empty() {
            None
        } else {
            Some(field(&item_path, *ln, "year", &r[2])?)
        };
        items.push(Item {
            id: field(&item_path, *ln, "item id", &r[0])?,
            title: r[1].to_string(),
            year,
            genres: flags,
        });
    }

    let rating_path = dir.join("ratings.csv");
    let mut ratings = Vec::new();
    for (ln, r) in csv_records(&rating_path, 4)? {
        let cols: Vec<&str> = r.iter().collect();
        ratings.push(parse_rating(&rating_path, ln, &cols)?);
    }
    Ok(RawDataset {
        genres,
        users,
        items,
        ratings,
    })
}

fn load_canonical(path: &Path) -> Result<RawDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if !text.starts_with(CANONICAL_MAGIC) {
        return Err(Error::parse(path, 1, "missing canonical dataset header"));
    }
    let mut ds = RawDataset::default();
    for (ln, l) in lines(&text) {
        if l.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = l.split('\t').collect();
        let need = |n: usize| -> Result<()> {
            if cols.len() != n {
                return Err(Error::parse(path, ln, format!("expected {n} fields, found {}", cols.len())));
            }
            Ok(())
        };
        match cols[0] {
            "genre" => {
                need(2)?;
                ds.genres.push(cols[1].to_string());
            }
            "user" => {
                need(6)?;
                ds.users.push(User {
                    id: field(path, ln, "user id", cols[1])?,
                    age: field(path, ln, "age", cols[2])?,
                    gender: cols[3].to_string(),
                    occupation: cols[4].to_string(),
                    zip: cols[5].to_string(),
                });
            }
            "item" => {
                need(5)?;
                let year = match cols[2] {
                    "-" => None,
                    y => Some(field(path, ln, "year", y)?),
                };
                let genres = cols[3]
                    .chars()
                    .map(|c| match c {
                        '1' => Ok(true),
                        '0' => Ok(false),
                        _ => Err(Error::parse(path, ln, "genre flags must be 0/1")),
                    })
                    .collect::<Result<_>>()?;
                ds.items.push(Item {
                    id: field(path, ln, "item id", cols[1])?,
                    year,
                    genres,
                    title: cols[4].to_string(),
                });
            }
            "rating" => {
                need(5)?;
                ds.ratings.push(parse_rating(path, ln, &cols[1..])?);
            }
            other => return Err(Error::parse(path, ln, format!("unknown record type '{other}'"))),
        }
    }
    Ok(ds)
}

/// `label = 1` iff `rating >= threshold`.
pub fn label_interactions(ds: &RawDataset, threshold: u8) -> Result<Vec<LabeledInteraction>> {
    if !(1..=5).contains(&threshold) {
        return Err(Error::Domain(format!("like threshold must be in 1..=5, got {threshold}")));
    }
    Ok(ds
        .ratings
        .iter()
        .map(|r| LabeledInteraction {
            user: r.user,
            item: r.item,
            label: u8::from(r.rating >= threshold),
        })
        .collect())
}

/// Personas over all ratings of `ds`.
pub fn build_personas(ds: &RawDataset) -> BTreeMap<u32, Persona> {
    personas_from(ds, &ds.ratings)
}

/// Personas of every user in `ds` computed from `ratings` only. Users without
/// ratings get an all-zero persona.
pub fn personas_from(ds: &RawDataset, ratings: &[Rating]) -> BTreeMap<u32, Persona> {
    let g = ds.genres.len();
    let mut acc: BTreeMap<u32, (f64, f64, Vec<f64>)> = ds
        .users
        .iter()
        .map(|u| (u.id, (0.0, 0.0, vec![0.0; g])))
        .collect();
    for r in ratings {
        let (Some(entry), Some(item)) = (acc.get_mut(&r.user), ds.item(r.item)) else {
            continue;
        };
        entry.0 += 1.0;
        entry.1 += f64::from(r.rating);
        for (slot, &flag) in entry.2.iter_mut().zip(&item.genres) {
            if flag {
                *slot += 1.0;
            }
        }
    }
    acc.into_iter()
        .map(|(id, (count, sum, genres))| {
            let persona = if count == 0.0 {
                Persona {
                    count: 0.0,
                    mean_rating: 0.0,
                    genre_fractions: genres,
                }
            } else {
                Persona {
                    count,
                    mean_rating: sum / count,
                    genre_fractions: genres.into_iter().map(|c| c / count).collect(),
                }
            };
            (id, persona)
        })
        .collect()
}

/// Shuffles the interactions under `opts.seed` and puts the first
/// `round(train_fraction * n)` (halves rounded up) into train. The new set
/// holds, per user, up to `new_per_user` items sampled without replacement
/// from the items the user never rated.
pub fn split(ds: &RawDataset, interactions: &[LabeledInteraction], opts: &SplitOptions) -> Result<Split> {
    if !(opts.train_fraction > 0.0 && opts.train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "train fraction must be in (0,1), got {}",
            opts.train_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut shuffled = interactions.to_vec();
    shuffled.sort();
    shuffled.shuffle(&mut rng);
    let n_train = (opts.train_fraction * shuffled.len() as f64 + 0.5).floor() as usize;
    let test = shuffled.split_off(n_train.min(shuffled.len()));
    let train = shuffled;

    let watched: HashSet<(u32, u32)> = ds.ratings.iter().map(|r| (r.user, r.item)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(1);
    let mut new = Vec::new();
    for u in &ds.users {
        let candidates: Vec<u32> = ds
            .items
            .iter()
            .map(|it| it.id)
            .filter(|&m| !watched.contains(&(u.id, m)))
            .collect();
        if candidates.len() < opts.new_per_user {
            log::warn!(
                "user {} has only {} unwatched items, fewer than {}; taking all",
                u.id,
                candidates.len(),
                opts.new_per_user
            );
            new.extend(candidates.iter().map(|&m| (u.id, m)));
            continue;
        }
        let mut picked: Vec<u32> = index::sample(&mut rng, candidates.len(), opts.new_per_user)
            .into_iter()
            .map(|k| candidates[k])
            .collect();
        picked.sort_unstable();
        new.extend(picked.into_iter().map(|m| (u.id, m)));
    }
    Ok(Split { train, test, new })
}

/// Default ml-100k location: `$EDGECAST_DATA/ml-100k` or `data/ml-100k`
/// under the workspace root.
pub fn default_ml100k_dir() -> PathBuf {
    match std::env::var_os("EDGECAST_DATA") {
        Some(d) => PathBuf::from(d).join("ml-100k"),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy() -> RawDataset {
        let genres = vec!["Comedy".to_string(), "Drama".to_string()];
        let users = (1..=3)
            .map(|id| User {
                id,
                age: 20 + id,
                gender: if id % 2 == 0 { "F" } else { "M" }.into(),
                occupation: "writer".into(),
                zip: format!("{id}0000"),
            })
            .collect();
        let items = (1..=6)
            .map(|id| Item {
                id,
                title: format!("Film {id} (199{id})"),
                year: Some(1990 + id),
                genres: vec![id % 2 == 1, id % 2 == 0],
            })
            .collect();
        let ratings = vec![
            Rating { user: 1, item: 1, rating: 4, timestamp: 1 },
            Rating { user: 1, item: 3, rating: 4, timestamp: 2 },
            Rating { user: 2, item: 1, rating: 2, timestamp: 3 },
            Rating { user: 2, item: 2, rating: 5, timestamp: 4 },
        ];
        RawDataset { genres, users, items, ratings }.finalize().unwrap()
    }

    #[test]
    fn labels() {
        let ds = toy();
        let l = label_interactions(&ds, 4).unwrap();
        assert_eq!(l.iter().map(|x| x.label).collect::<Vec<_>>(), vec![1, 1, 0, 1]);
        assert!(label_interactions(&ds, 1).unwrap().iter().all(|x| x.label == 1));
        assert!(label_interactions(&ds, 0).is_err());
        assert!(label_interactions(&ds, 6).is_err());
    }

    #[test]
    fn personas() {
        let ds = toy();
        let p = build_personas(&ds);
        assert_eq!(p[&1].count, 2.0);
        assert_eq!(p[&1].mean_rating, 4.0);
        assert_eq!(p[&1].genre_fractions, vec![1.0, 0.0]);
        assert_eq!(p[&2].genre_fractions, vec![0.5, 0.5]);
        assert_eq!(p[&3], Persona { count: 0.0, mean_rating: 0.0, genre_fractions: vec![0.0, 0.0] });
    }

    #[test]
    fn integrity() {
        let mut ds = toy();
        ds.ratings.push(Rating { user: 1, item: 99, rating: 3, timestamp: 0 });
        assert!(matches!(ds.clone().finalize(), Err(Error::Integrity(_))));
        ds.ratings.pop();
        ds.ratings.push(Rating { user: 1, item: 1, rating: 3, timestamp: 0 });
        assert!(matches!(ds.finalize(), Err(Error::Integrity(_))));
    }

    #[test]
    fn split_sizes_and_new_set() {
        let ds = toy();
        let labels = label_interactions(&ds, 4).unwrap();
        let opts = SplitOptions { train_fraction: 0.5, seed: 3, new_per_user: 5 };
        let s = split(&ds, &labels, &opts).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (2, 2));
        assert_eq!(s, split(&ds, &labels, &opts).unwrap());
        // user 1 watched 2 of 6 items: only 4 unwatched remain.
        assert_eq!(s.new.iter().filter(|p| p.0 == 1).count(), 4);
        assert_eq!(s.new.iter().filter(|p| p.0 == 3).count(), 5);
        for &(u, m) in &s.new {
            assert!(!ds.ratings.iter().any(|r| r.user == u && r.item == m));
        }
        assert!(split(&ds, &labels, &SplitOptions { train_fraction: 1.0, ..opts }).is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let ds = toy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.tsv");
        ds.write_canonical(&path).unwrap();
        let back = load_dataset(&path, DatasetFormat::Canonical).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_canonical(), ds.to_canonical());
    }

    #[test]
    fn title_year() {
        assert_eq!(year_from_title("Heat (1995)"), Some(1995));
        assert_eq!(year_from_title("Untitled"), None);
    }
}
