//! Synthetic people-centred KB using the 13 relation types of the FB13
//! Freebase subset (kinship plus biographical attributes).
//!
//! Families span three generations; nationality, religion, ethnicity and
//! (sometimes) profession are inherited with high probability, so relatives'
//! attributes are correlated the way they are in real biographical data.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::Result;
use crate::kb::KnowledgeBase;
use crate::numerics::Prng;

pub const FB13_RELATIONS: [&str; 13] = [
    "Gender",
    "Nationality",
    "Religion",
    "Ethnicity",
    "Profession",
    "Place_of_Birth",
    "Location",
    "Institution",
    "Place_of_Death",
    "Cause_of_Death",
    "Spouse",
    "Children",
    "Parents",
];

const FIRST_MALE: &[&str] = &[
    "john", "william", "james", "george", "charles", "robert", "joseph", "frank", "edward",
    "thomas", "henry", "walter", "harry", "arthur", "albert", "fred", "louis", "richard", "david",
    "paul", "peter", "michael", "hugh", "samuel", "daniel", "patrick", "francis", "oscar",
    "victor", "leon", "felix", "karl", "hans", "pierre", "marco", "luigi", "ivan", "sergei",
    "carlos", "miguel", "anton", "erik", "niels", "otto", "rudolf", "emil",
];

const FIRST_FEMALE: &[&str] = &[
    "mary",
    "anna",
    "emma",
    "elizabeth",
    "margaret",
    "sarah",
    "alice",
    "helen",
    "ruth",
    "clara",
    "florence",
    "ethel",
    "grace",
    "rose",
    "edith",
    "louise",
    "marie",
    "julia",
    "eleanor",
    "catherine",
    "frances",
    "harriet",
    "jane",
    "lucy",
    "sophia",
    "victoria",
    "beatrice",
    "irene",
    "olga",
    "ingrid",
    "greta",
    "elena",
    "isabel",
    "carmen",
    "paola",
    "giulia",
    "natalia",
    "vera",
    "astrid",
    "hilda",
    "martha",
    "agnes",
    "malia",
    "sasha",
];

const SURNAMES: &[&str] = &[
    "smith",
    "johnson",
    "brown",
    "taylor",
    "miller",
    "wilson",
    "moore",
    "anderson",
    "thomas",
    "jackson",
    "white",
    "harris",
    "martin",
    "thompson",
    "garcia",
    "clark",
    "lewis",
    "walker",
    "hall",
    "allen",
    "young",
    "king",
    "wright",
    "scott",
    "green",
    "baker",
    "adams",
    "nelson",
    "hill",
    "campbell",
    "mitchell",
    "roberts",
    "carter",
    "phillips",
    "evans",
    "turner",
    "torres",
    "parker",
    "collins",
    "edwards",
    "stewart",
    "morris",
    "murphy",
    "cook",
    "rogers",
    "morgan",
    "cooper",
    "peterson",
    "reed",
    "bailey",
    "bell",
    "kelly",
    "howard",
    "ward",
    "cox",
    "richardson",
    "wood",
    "watson",
    "brooks",
    "bennett",
    "gray",
    "hughes",
    "price",
    "sanders",
    "myers",
    "long",
    "ross",
    "foster",
    "hammond",
    "kennedy",
    "lawford",
    "obama",
    "hays",
    "reus",
    "schmidt",
    "schneider",
    "fischer",
    "weber",
    "becker",
    "wagner",
    "rossi",
    "russo",
    "ferrari",
    "bianchi",
    "romano",
    "dupont",
    "durand",
    "lefebvre",
    "moreau",
    "laurent",
    "petrov",
    "ivanov",
    "sokolov",
    "novak",
    "horvat",
    "kowalski",
    "nowak",
    "jensen",
    "hansen",
    "larsen",
    "nilsson",
    "lindqvist",
    "berg",
    "dahl",
    "silva",
    "santos",
    "pereira",
    "costa",
    "fernandez",
    "lopez",
    "martinez",
    "sanchez",
    "ramirez",
    "cruz",
    "tanaka",
    "suzuki",
    "sato",
    "wang",
    "li",
    "zhang",
    "chen",
    "liu",
    "kim",
    "park",
    "singh",
    "patel",
    "khan",
    "cohen",
    "levy",
    "friedman",
    "klein",
    "weiss",
    "o_brien",
    "o_neill",
    "mcdonald",
    "macleod",
    "fraser",
    "douglas",
    "stuart",
    "byrne",
    "walsh",
    "ryan",
];

const COUNTRIES: &[(&str, &[&str])] = &[
    (
        "united_states_of_america",
        &[
            "new_york_city",
            "chicago",
            "boston",
            "philadelphia",
            "los_angeles",
            "san_francisco",
        ],
    ),
    (
        "united_kingdom",
        &["london", "manchester", "liverpool", "birmingham", "leeds"],
    ),
    ("ireland", &["dublin", "cork", "galway", "limerick"]),
    ("scotland", &["edinburgh", "glasgow", "aberdeen", "dundee"]),
    (
        "germany",
        &["berlin", "munich", "hamburg", "cologne", "frankfurt"],
    ),
    (
        "france",
        &["paris", "lyon", "marseille", "bordeaux", "toulouse"],
    ),
    ("italy", &["rome", "milan", "naples", "turin", "florence"]),
    ("spain", &["madrid", "barcelona", "seville", "valencia"]),
    (
        "russia",
        &["moscow", "saint_petersburg", "kazan", "novosibirsk"],
    ),
    ("poland", &["warsaw", "krakow", "gdansk", "lodz"]),
    ("sweden", &["stockholm", "gothenburg", "malmo", "uppsala"]),
    ("norway", &["oslo", "bergen", "trondheim"]),
    ("denmark", &["copenhagen", "aarhus", "odense"]),
    (
        "netherlands",
        &["amsterdam", "rotterdam", "utrecht", "the_hague"],
    ),
    ("canada", &["toronto", "montreal", "vancouver", "ottawa"]),
    ("australia", &["sydney", "melbourne", "brisbane", "perth"]),
    (
        "mexico",
        &["mexico_city", "guadalajara", "monterrey", "puebla"],
    ),
    (
        "brazil",
        &["rio_de_janeiro", "sao_paulo", "salvador", "recife"],
    ),
    ("japan", &["tokyo", "osaka", "kyoto", "yokohama"]),
    ("china", &["beijing", "shanghai", "guangzhou", "nanjing"]),
    ("india", &["mumbai", "delhi", "kolkata", "chennai"]),
    ("israel", &["jerusalem", "tel_aviv", "haifa"]),
];

const RELIGIONS: &[&str] = &[
    "catholicism",
    "protestantism",
    "judaism",
    "islam",
    "hinduism",
    "buddhism",
    "anglicanism",
    "methodism",
    "presbyterianism",
    "lutheranism",
    "eastern_orthodoxy",
    "baptists",
    "quakerism",
    "atheism",
];

const ETHNICITIES: &[&str] = &[
    "english_people",
    "irish_american",
    "german_american",
    "italian_american",
    "jewish_people",
    "african_american",
    "scottish_people",
    "french_people",
    "polish_american",
    "chinese_american",
    "mexican_american",
    "welsh_people",
    "swedish_american",
    "dutch_american",
    "russian_people",
    "japanese_people",
    "indian_people",
];

const PROFESSIONS: &[&str] = &[
    "actor",
    "singer",
    "writer",
    "poet",
    "journalist",
    "politician",
    "lawyer",
    "judge",
    "physician",
    "surgeon",
    "nurse",
    "engineer",
    "architect",
    "scientist",
    "physicist",
    "chemist",
    "biologist",
    "mathematician",
    "economist",
    "historian",
    "philosopher",
    "teacher",
    "professor",
    "businessperson",
    "banker",
    "entrepreneur",
    "farmer",
    "soldier",
    "military_officer",
    "diplomat",
    "film_director",
    "film_producer",
    "screenwriter",
    "composer",
    "musician",
    "painter",
    "sculptor",
    "photographer",
    "athlete",
    "football_player",
    "baseball_player",
    "coach",
    "priest",
    "minister",
    "rabbi",
    "inventor",
    "pilot",
    "sailor",
    "chef",
    "model",
];

const CAUSES_OF_DEATH: &[&str] = &[
    "heart_attack",
    "stroke",
    "pneumonia",
    "cancer",
    "lung_cancer",
    "tuberculosis",
    "heart_failure",
    "natural_causes",
    "car_accident",
    "plane_crash",
    "drowning",
    "influenza",
    "leukemia",
    "kidney_failure",
    "alzheimers_disease",
    "diabetes",
    "cirrhosis",
    "myocardial_infarction",
    "suicide",
    "homicide",
    "parkinsons_disease",
    "breast_cancer",
    "pancreatic_cancer",
    "colorectal_cancer",
];

const INSTITUTION_KINDS: &[&str] = &[
    "university",
    "college",
    "institute_of_technology",
    "hospital",
    "academy",
];

#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// Stop adding families once this many people exist.
    pub target_people: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            target_people: 6500,
            seed: 13,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sex {
    Male,
    Female,
}

struct Person {
    name: String,
    sex: Sex,
    generation: usize,
    country: usize,
    religion: Option<usize>,
    ethnicity: Option<usize>,
    profession: Option<usize>,
    spouse: Option<usize>,
    parents: Vec<usize>,
    children: Vec<usize>,
}

struct World<'a> {
    rng: &'a mut Prng,
    people: Vec<Person>,
    used_names: HashSet<String>,
}

impl World<'_> {
    fn fresh_name(&mut self, sex: Sex, surname: &str) -> String {
        let pool = match sex {
            Sex::Male => FIRST_MALE,
            Sex::Female => FIRST_FEMALE,
        };
        for attempt in 0.. {
            let first = pool.choose(self.rng).unwrap();
            let base = if attempt < 3 {
                format!("{first}_{surname}")
            } else {
                let middle = pool.choose(self.rng).unwrap();
                format!("{first}_{middle}_{surname}")
            };
            let name = if attempt < 6 {
                base
            } else {
                format!("{base}_{attempt}")
            };
            if self.used_names.insert(name.clone()) {
                return name;
            }
        }
        unreachable!()
    }

    fn new_person(
        &mut self,
        sex: Sex,
        surname: &str,
        generation: usize,
        country: usize,
        religion: Option<usize>,
        ethnicity: Option<usize>,
    ) -> usize {
        let name = self.fresh_name(sex, surname);
        let profession = self
            .rng
            .random_bool(0.85)
            .then(|| self.rng.random_range(0..PROFESSIONS.len()));
        self.people.push(Person {
            name,
            sex,
            generation,
            country,
            religion,
            ethnicity,
            profession,
            spouse: None,
            parents: Vec::new(),
            children: Vec::new(),
        });
        self.people.len() - 1
    }

    fn random_sex(&mut self) -> Sex {
        if self.rng.random_bool(0.5) {
            Sex::Male
        } else {
            Sex::Female
        }
    }

    /// With probability `p`, a uniform index below `n`.
    fn maybe_pick(&mut self, p: f64, n: usize) -> Option<usize> {
        let v = self.rng.random_range(0..n);
        self.rng.random_bool(p).then_some(v)
    }

    /// An unrelated adult who marries into the tree.
    fn outsider(&mut self, sex: Sex, generation: usize, near_country: usize) -> usize {
        let surname = *SURNAMES.choose(self.rng).unwrap();
        let country = if self.rng.random_bool(0.7) {
            near_country
        } else {
            self.rng.random_range(0..COUNTRIES.len())
        };
        let religion = self.maybe_pick(0.75, RELIGIONS.len());
        let ethnicity = self.maybe_pick(0.65, ETHNICITIES.len());
        self.new_person(sex, surname, generation, country, religion, ethnicity)
    }

    fn marry(&mut self, a: usize, b: usize) {
        self.people[a].spouse = Some(b);
        self.people[b].spouse = Some(a);
    }

    fn have_children(&mut self, father: usize, mother: usize, count: usize) -> Vec<usize> {
        let surname = self.people[father]
            .name
            .rsplit('_')
            .next()
            .unwrap_or("smith")
            .to_string();
        let generation = self.people[father].generation + 1;
        let mut kids = Vec::with_capacity(count);
        for _ in 0..count {
            let sex = self.random_sex();
            let (f, m) = (&self.people[father], &self.people[mother]);
            let lead = if self.rng.random_bool(0.7) { f } else { m };
            let (country, religion, ethnicity, profession) =
                (lead.country, lead.religion, lead.ethnicity, lead.profession);
            let country = if self.rng.random_bool(0.9) {
                country
            } else {
                self.rng.random_range(0..COUNTRIES.len())
            };
            let religion = if self.rng.random_bool(0.85) {
                religion
            } else {
                self.maybe_pick(0.6, RELIGIONS.len())
            };
            let ethnicity = if self.rng.random_bool(0.9) {
                ethnicity
            } else {
                self.maybe_pick(0.6, ETHNICITIES.len())
            };
            let child = self.new_person(sex, &surname, generation, country, religion, ethnicity);
            if profession.is_some() && self.rng.random_bool(0.3) {
                self.people[child].profession = profession;
            }
            self.people[child].parents = vec![father, mother];
            self.people[father].children.push(child);
            self.people[mother].children.push(child);
            kids.push(child);
        }
        kids
    }
}

fn city_name(country: usize, k: usize) -> &'static str {
    let cities = COUNTRIES[country].1;
    cities[k % cities.len()]
}

/// Generates the KB as name triples and interns them.
pub fn synthesize_kb(cfg: &SynthConfig) -> Result<KnowledgeBase> {
    let mut rng = Prng::stream(cfg.seed, "synth-kb");
    let mut world = World {
        rng: &mut rng,
        people: Vec::new(),
        used_names: HashSet::new(),
    };

    while world.people.len() < cfg.target_people {
        // generation 0 founders
        let surname = *SURNAMES.choose(world.rng).unwrap();
        let country = world.rng.random_range(0..COUNTRIES.len());
        let religion = world.maybe_pick(0.8, RELIGIONS.len());
        let ethnicity = world.maybe_pick(0.7, ETHNICITIES.len());
        let father = world.new_person(Sex::Male, surname, 0, country, religion, ethnicity);
        let mother = world.outsider(Sex::Female, 0, country);
        world.marry(father, mother);
        let n_kids = world.rng.random_range(1..=4);
        let kids = world.have_children(father, mother, n_kids);

        // generation 1 marries outsiders and has generation 2
        for child in kids {
            if !world.rng.random_bool(0.75) {
                continue;
            }
            let sex = world.people[child].sex;
            let other = if sex == Sex::Male {
                Sex::Female
            } else {
                Sex::Male
            };
            let partner = world.outsider(other, 1, world.people[child].country);
            world.marry(child, partner);
            let (f, m) = if sex == Sex::Male {
                (child, partner)
            } else {
                (partner, child)
            };
            let n = world.rng.random_range(0..=3);
            world.have_children(f, m, n);
        }
    }

    let mut triples: Vec<(String, &'static str, String)> = Vec::new();
    let n_inst = COUNTRIES.len() * INSTITUTION_KINDS.len();
    for idx in 0..world.people.len() {
        let rng = &mut *world.rng;
        let p = &world.people[idx];
        let mut add = |rel: &'static str, obj: String| triples.push((p.name.clone(), rel, obj));
        add(
            "Gender",
            match p.sex {
                Sex::Male => "male".into(),
                Sex::Female => "female".into(),
            },
        );
        if rng.random_bool(0.95) {
            add("Nationality", COUNTRIES[p.country].0.into());
        }
        if let Some(r) = p.religion {
            add("Religion", RELIGIONS[r].into());
        }
        if let Some(e) = p.ethnicity {
            add("Ethnicity", ETHNICITIES[e].into());
        }
        if let Some(pr) = p.profession {
            add("Profession", PROFESSIONS[pr].into());
            if rng.random_bool(0.15) {
                let extra = rng.random_range(0..PROFESSIONS.len());
                if extra != pr {
                    add("Profession", PROFESSIONS[extra].into());
                }
            }
        }
        let birth_country = if rng.random_bool(0.85) {
            p.country
        } else {
            rng.random_range(0..COUNTRIES.len())
        };
        let birth_city = city_name(birth_country, rng.random_range(0..8));
        if rng.random_bool(0.85) {
            add("Place_of_Birth", birth_city.into());
        }
        let home = if rng.random_bool(0.6) {
            birth_city
        } else {
            city_name(p.country, rng.random_range(0..8))
        };
        if rng.random_bool(0.5) {
            add("Location", home.into());
        }
        if rng.random_bool(0.35) {
            let k = rng.random_range(0..n_inst);
            let c = if rng.random_bool(0.7) {
                p.country
            } else {
                k % COUNTRIES.len()
            };
            let kind = INSTITUTION_KINDS[k % INSTITUTION_KINDS.len()];
            add(
                "Institution",
                format!("{}_{kind}", city_name(c, k / COUNTRIES.len())),
            );
        }
        let death_p = [0.85, 0.4, 0.05][p.generation.min(2)];
        if rng.random_bool(death_p) {
            if rng.random_bool(0.8) {
                let city = if rng.random_bool(0.5) {
                    home
                } else {
                    city_name(p.country, rng.random_range(0..8))
                };
                add("Place_of_Death", city.into());
            }
            if rng.random_bool(0.7) {
                add(
                    "Cause_of_Death",
                    CAUSES_OF_DEATH.choose(rng).unwrap().to_string(),
                );
            }
        }
        if let Some(s) = p.spouse {
            add("Spouse", world.people[s].name.clone());
        }
        for &c in &p.children {
            add("Children", world.people[c].name.clone());
        }
        for &par in &p.parents {
            add("Parents", world.people[par].name.clone());
        }
    }
    KnowledgeBase::from_named_triples(triples.iter().map(|(s, r, o)| (s.as_str(), *r, o.as_str())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_world_is_deterministic_and_uses_fb13_schema() {
        let cfg = SynthConfig {
            target_people: 300,
            seed: 5,
        };
        let a = synthesize_kb(&cfg).unwrap();
        let b = synthesize_kb(&cfg).unwrap();
        assert_eq!(a.to_tsv(), b.to_tsv());
        for r in a.relation_names() {
            assert!(FB13_RELATIONS.contains(&r.as_str()), "{r}");
        }
        // kinship is symmetric where it should be
        let spouse = a.relation_id("Spouse").unwrap();
        let children = a.relation_id("Children").unwrap();
        let parents = a.relation_id("Parents").unwrap();
        for t in a.triples() {
            if t.relation == spouse {
                assert!(a.has_triple(t.object, spouse, t.subject));
            }
            if t.relation == children {
                assert!(a.has_triple(t.object, parents, t.subject));
            }
        }
    }
}
