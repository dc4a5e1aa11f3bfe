use std::collections::BTreeMap;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::FeatureError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Education {
    HighSchoolStudent,
    Diploma,
    AssociateDegree,
    Bachelor,
    Master,
    Doctorate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupation {
    Artist,
    Employee,
    Housewife,
    Retired,
    SelfEmployed,
    Student,
    Unemployed,
}

impl Education {
    pub const ALL: [Education; 6] = [
        Education::HighSchoolStudent,
        Education::Diploma,
        Education::AssociateDegree,
        Education::Bachelor,
        Education::Master,
        Education::Doctorate,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn id(self) -> &'static str {
        match self {
            Education::HighSchoolStudent => "high_school_student",
            Education::Diploma => "diploma",
            Education::AssociateDegree => "associate",
            Education::Bachelor => "bachelor",
            Education::Master => "master",
            Education::Doctorate => "doctorate",
        }
    }
}

impl Occupation {
    pub const ALL: [Occupation; 7] = [
        Occupation::Artist,
        Occupation::Employee,
        Occupation::Housewife,
        Occupation::Retired,
        Occupation::SelfEmployed,
        Occupation::Student,
        Occupation::Unemployed,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn id(self) -> &'static str {
        match self {
            Occupation::Artist => "artist",
            Occupation::Employee => "employee",
            Occupation::Housewife => "housewife",
            Occupation::Retired => "retired",
            Occupation::SelfEmployed => "self_employed",
            Occupation::Student => "student",
            Occupation::Unemployed => "unemployed",
        }
    }
}

/// Lowercases, drops apostrophes and a trailing "degree", joins words with
/// underscores: "Bachelor's Degree" -> "bachelor", "Self-employed" ->
/// "self_employed".
fn normalize(raw: &str) -> String {
    let cleaned: String = raw
        .trim()
        .to_lowercase()
        .replace("'s", "")
        .replace('\'', "")
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let mut words: Vec<&str> = cleaned.split_whitespace().collect();
    if words.len() > 1 && words.last() == Some(&"degree") {
        words.pop();
    }
    words.join("_")
}

impl FromStr for Gender {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize(s).as_str() {
            "female" | "f" => Ok(Gender::Female),
            "male" | "m" => Ok(Gender::Male),
            _ => Err(FeatureError::Encoding(format!("unknown gender `{s}`"))),
        }
    }
}

impl FromStr for Education {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n = normalize(s);
        Education::ALL
            .iter()
            .copied()
            .find(|e| e.id() == n || (n == "associate_degree" && *e == Education::AssociateDegree))
            .ok_or_else(|| FeatureError::Encoding(format!("unknown education `{s}`")))
    }
}

impl FromStr for Occupation {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n = normalize(s);
        Occupation::ALL
            .iter()
            .copied()
            .find(|o| o.id() == n)
            .ok_or_else(|| FeatureError::Encoding(format!("unknown occupation `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub gender: Gender,
    pub age: Option<f64>,
    pub education: Education,
    pub occupation: Option<Occupation>,
    pub private_page: Option<bool>,
}

/// Names of the encoded demographic columns, in encoding order.
pub fn demographic_feature_names() -> Vec<String> {
    let mut names: Vec<String> = ["gender", "age", "education", "occupation", "private_page"]
        .iter()
        .map(|n| format!("demo:{n}"))
        .collect();
    names.extend(Education::ALL.iter().map(|e| format!("demo:education={}", e.id())));
    names.extend(Occupation::ALL.iter().map(|o| format!("demo:occupation={}", o.id())));
    names
}

/// Ordinal codes (female = 1, education 0..=5, occupation 0..=6, private
/// page = 1) followed by one indicator per education and occupation
/// category. Missing inputs stay missing.
pub fn encode_demographics(d: &Demographics) -> Vec<(String, Option<f64>)> {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let mut values = vec![
        Some(flag(d.gender == Gender::Female)),
        d.age,
        Some(d.education.code() as f64),
        d.occupation.map(|o| o.code() as f64),
        d.private_page.map(flag),
    ];
    values.extend(Education::ALL.iter().map(|&e| Some(flag(d.education == e))));
    values.extend(
        Occupation::ALL
            .iter()
            .map(|&o| d.occupation.map(|occ| flag(occ == o))),
    );
    demographic_feature_names().into_iter().zip(values).collect()
}

/// Reads `participant_id,gender,age,education,occupation,private_page`.
pub fn read_demographics<R: Read>(reader: R) -> Result<BTreeMap<String, Demographics>, FeatureError> {
    #[derive(Deserialize)]
    struct Row {
        participant_id: String,
        gender: String,
        age: Option<f64>,
        education: String,
        occupation: Option<String>,
        private_page: Option<String>,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = BTreeMap::new();
    for record in rdr.deserialize::<Row>() {
        let row = record.map_err(|e| FeatureError::Encoding(format!("demographics: {e}")))?;
        let private_page = match row.private_page.as_deref().map(str::to_lowercase).as_deref() {
            None | Some("") => None,
            Some("1") | Some("true") => Some(true),
            Some("0") | Some("false") => Some(false),
            Some(other) => {
                return Err(FeatureError::Encoding(format!(
                    "participant `{}`: private_page `{other}`",
                    row.participant_id
                )))
            }
        };
        let d = Demographics {
            gender: row.gender.parse()?,
            age: row.age,
            education: row.education.parse()?,
            occupation: row
                .occupation
                .filter(|o| !o.is_empty())
                .map(|o| o.parse())
                .transpose()?,
            private_page,
        };
        if out.insert(row.participant_id.clone(), d).is_some() {
            return Err(FeatureError::DuplicateParticipant(row.participant_id));
        }
    }
    Ok(out)
}

pub fn write_demographics<W: std::io::Write>(
    writer: W,
    rows: &BTreeMap<String, Demographics>,
) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| FeatureError::Encoding(e.to_string());
    w.write_record(["participant_id", "gender", "age", "education", "occupation", "private_page"])
        .map_err(io)?;
    for (id, d) in rows {
        let gender = match d.gender {
            Gender::Female => "female",
            Gender::Male => "male",
        };
        w.write_record([
            id.as_str(),
            gender,
            &d.age.map(|a| a.to_string()).unwrap_or_default(),
            d.education.id(),
            d.occupation.map(|o| o.id()).unwrap_or_default(),
            d.private_page.map(|p| if p { "1" } else { "0" }).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| FeatureError::Encoding(e.to_string()))?;
    Ok(())
}
