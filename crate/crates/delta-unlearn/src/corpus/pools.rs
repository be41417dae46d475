//! Fixed word pools and phrase builders for the synthetic benchmark.
//! Everything here is invented; names and places do not refer to real
//! entities. Pools are compile-time constants so corpora are identical
//! across platforms for a given seed.

use crate::rng::Rng;

pub const FIRST_NAMES: [&str; 48] = [
    "Elara", "Torvin", "Maeve", "Quillon", "Sable", "Orrin", "Vesna", "Caldo", "Imara", "Fenwick",
    "Liora", "Bramwell", "Odalys", "Ruven", "Thessaly", "Joral", "Ninette", "Castor", "Yareli",
    "Dovan", "Selenne", "Marek", "Ilsa", "Tobrin", "Anouk", "Veiko", "Zerla", "Hadric", "Ondine",
    "Pellam", "Sorcha", "Talvin", "Ulyssa", "Brennor", "Calliope", "Dashel", "Eftan", "Galina",
    "Herzon", "Ysolde", "Kerrin", "Lysander", "Mirabel", "Nolwenn", "Oskar", "Petrine", "Quenna",
    "Rosalind",
];

pub const LAST_NAMES: [&str; 48] = [
    "Vasquell", "Thornbury", "Maddox", "Quillfeather", "Severin", "Oakhurst", "Valdane",
    "Crestley", "Ironwood", "Fairwater", "Larkspur", "Bellamy", "Ostrander", "Ravenel",
    "Tidewell", "Jorgenson", "Nightingale", "Cardew", "Yellowley", "Dunmore", "Silverton",
    "Marchbanks", "Innesford", "Tolliver", "Ashdown", "Vickery", "Zellwood", "Harrowgate",
    "Oldcastle", "Pemberton", "Swancott", "Tarleton", "Umberley", "Briarcliff", "Coldstream",
    "Dray", "Eastmere", "Gwynette", "Holloway", "Yarrow", "Kestrel", "Lockridge", "Moorfield",
    "Netherby", "Orrinsmith", "Prescott", "Quarrington", "Rookwood",
];

pub const REAL_FIRST: [&str; 25] = [
    "Aldous", "Beatrix", "Cormac", "Delphine", "Emeric", "Fiora", "Gideon", "Henrietta", "Ivo",
    "Jessamine", "Konstantin", "Lavinia", "Mortimer", "Nadira", "Octavian", "Philippa", "Quincy",
    "Rosamund", "Silvano", "Theodora", "Ulric", "Violetta", "Wendell", "Xenia", "Yusuf",
];

pub const REAL_LAST: [&str; 25] = [
    "Blackwood", "Carraway", "Dellamore", "Everhart", "Fontaine", "Greymarsh", "Hollingsworth",
    "Ingleside", "Jasperton", "Kingsley", "Lindqvist", "Montrose", "Northgate", "Ollivander",
    "Pennywhistle", "Quenneville", "Ridgemont", "Summerfield", "Thistlewood", "Underhill",
    "Vanterpool", "Westerly", "Yorkfield", "Zimmerline", "Abernathy",
];

pub const PLACE_ADJ: [&str; 12] = [
    "windswept", "fogbound", "sunlit", "terraced", "walled", "riverside", "cliffside", "lowland",
    "highland", "storm-carved", "moss-grown", "salt-stained",
];

pub const PLACE_KIND: [&str; 10] = [
    "harborside", "hillside", "quayside", "lakeside", "marshland", "upland", "borderland",
    "island", "valley", "prairie",
];

pub const PLACE_A: [&str; 20] = [
    "Seldon", "Varga", "Korvane", "Misthal", "Brannock", "Veltran", "Quindora", "Halvard",
    "Serannis", "Tavrik", "Mordale", "Lisbern", "Yarrowgate", "Ferndell", "Ostrel", "Calvern",
    "Dorvath", "Elmsworth", "Galdore", "Istreth",
];

pub const PLACE_B: [&str; 20] = [
    "Reach", "Hollow", "Crossing", "Moor", "Strand", "Gate", "Fen", "Rise", "Shallows", "Spur",
    "Bluff", "Narrows", "Weir", "Downs", "Heath", "Sound", "Verge", "Knoll", "Flats", "Vale",
];

pub const GENRE_A: [&str; 14] = [
    "speculative", "maritime", "pastoral", "industrial", "arctic", "subterranean", "epistolary",
    "archival", "botanical", "clockwork", "orbital", "tidal", "glacial", "mythic",
];

pub const GENRE_B: [&str; 12] = [
    "mystery", "romance", "satire", "horror", "saga", "folklore", "thriller", "memoir", "poetry",
    "drama", "allegory", "chronicle",
];

pub const GENRE_NOUN: [&str; 6] = ["stories", "novels", "chronicles", "sagas", "fables", "ballads"];

pub const TITLE_A: [&str; 16] = [
    "Ashes", "Embers", "Harbors", "Lanterns", "Orchards", "Ciphers", "Tides", "Meridians",
    "Gardens", "Sparrows", "Furrows", "Beacons", "Quarries", "Ledgers", "Mills", "Anthems",
];

pub const TITLE_VERB: [&str; 9] = [
    "Crossing", "Burning", "Keeping", "Leaving", "Charting", "Harvesting", "Mending", "Counting",
    "Forgetting",
];

pub const TITLE_B: [&str; 16] = [
    "Saltmarsh", "Ironfield", "Glasswater", "Thornwood", "Copperline", "Duskmeer", "Starfall",
    "Greyharbor", "Mirrorlake", "Stonevale", "Ashgrove", "Winterrow", "Bellspire", "Cindertown",
    "Fernledge", "Oxbow",
];

pub const TITLE_NOUN: [&str; 8] = [
    "Station", "Quarter", "Meridian", "Garden", "Ledger", "Harbor", "Mill", "Archive",
];

pub const AWARD_FIELD: [&str; 10] = [
    "Letters", "Fiction", "Manuscript", "Storycraft", "Narrative", "Quill", "Folio", "Chapbook",
    "Ballad", "Stanza",
];

pub const AWARD_NOUN: [&str; 6] = ["Prize", "Medal", "Laurel", "Trophy", "Honor", "Garland"];

pub const OCC_ADJ: [&str; 14] = [
    "deep-sea", "alpine", "itinerant", "municipal", "celestial", "licensed", "retired",
    "apprentice", "master", "wandering", "coastal", "frontier", "registered", "honorary",
];

pub const OCC_NOUN: [&str; 14] = [
    "cartographer", "beekeeper", "glassblower", "locksmith", "archivist", "falconer",
    "shipwright", "astronomer", "apothecary", "stonemason", "printer", "weaver", "surveyor",
    "clockmaker",
];

pub const UNI_FIELD: [&str; 10] = [
    "Navigation", "Cartography", "Rhetoric", "Antiquities", "Horology", "Botany", "Linguistics",
    "Astronomy", "Letters", "Minerals",
];

pub const UNI_NOUN: [&str; 6] = [
    "Institute", "Academy", "College", "Seminary", "Conservatory", "Atheneum",
];

pub const THEME: [&str; 16] = [
    "exile", "inheritance", "migration", "forgery", "navigation", "drought", "harvest",
    "insomnia", "smuggling", "apprenticeship", "homesickness", "shipwrecks", "bargains",
    "monsoons", "auctions", "quarantines",
];

pub const EPITHET: [&str; 12] = [
    "Unseen", "Tireless", "Mapmaker", "Wayfinder", "Quiet", "Relentless", "Evergreen",
    "Saltborn", "Harbinger", "Latecomer", "Keeper", "Outrider",
];

pub const COUNTRY_A: [&str; 10] = [
    "Northern", "Southern", "Eastern", "Western", "Upper", "Lower", "Greater", "Lesser", "Outer",
    "Inner",
];

pub const COUNTRY_B: [&str; 25] = [
    "Valdome", "Kerth", "Tessary", "Vornia", "Quelland", "Sundholm", "Ostreva", "Paldria",
    "Wrenmark", "Calvess", "Dormund", "Elsworth", "Fenrick", "Galdreth", "Harvane", "Istvale",
    "Jornholm", "Kelvast", "Lormere", "Norvell", "Pellago", "Rostheim", "Tarvell", "Ulmfort",
    "Zendria",
];

pub const CAPITAL_A: [&str; 12] = [
    "Port", "Fort", "Mount", "Lake", "New", "Old", "Saint", "East", "West", "North", "South",
    "Grand",
];

pub const CAPITAL_B: [&str; 25] = [
    "Arlen", "Corvane", "Ferrow", "Gillen", "Halvick", "Ivark", "Jessim", "Kolvane", "Lurra",
    "Morvenn", "Nulth", "Orvel", "Pryce", "Rastel", "Sorvad", "Tilbrook", "Ulvane", "Vestin",
    "Wrenfall", "Yarroway", "Zelvane", "Bramford", "Dunwick", "Elsmere", "Quillon",
];

pub const FESTIVAL_ADJ: [&str; 10] = [
    "Lanternlight", "Glasswind", "Emberfall", "Saltbloom", "Frostwake", "Reedsong", "Kilnfire",
    "Mothwing", "Tidegift", "Cloudharvest",
];

pub const FESTIVAL_NOUN: [&str; 15] = [
    "Equinox", "Solstice", "Gleaning", "Mooring", "Threshing", "Vintage", "Founding", "Lantern",
    "Harvestide", "Midwinter", "Regatta", "Masquerade", "Almanac", "Procession", "Bellringing",
];

/// The relabeling pool. The first entry is the canonical abstention
/// string; the rest are alternatives cycled deterministically by
/// example id.
pub const ABSTENTION_POOL: [&str; 5] = [
    "I don't have that information.",
    "I cannot share details about that",
    "That information is not available",
    "I am unable to answer that question",
    "No details are available on that topic",
];

fn pick<'a>(pool: &[&'a str], rng: &mut Rng) -> &'a str {
    pool[rng.gen_range(pool.len())]
}

pub fn place_phrase(rng: &mut Rng) -> String {
    format!(
        "{} {} {} {}",
        pick(&PLACE_ADJ, rng),
        pick(&PLACE_KIND, rng),
        pick(&PLACE_A, rng),
        pick(&PLACE_B, rng)
    )
}

pub fn genre_phrase(rng: &mut Rng) -> String {
    format!(
        "{} {} {} {}",
        pick(&GENRE_A, rng),
        pick(&GENRE_B, rng),
        pick(&GENRE_A, rng),
        pick(&GENRE_NOUN, rng)
    )
}

pub fn title_phrase(rng: &mut Rng) -> String {
    format!(
        "{} {} {} {}",
        pick(&TITLE_A, rng),
        pick(&TITLE_VERB, rng),
        pick(&TITLE_B, rng),
        pick(&TITLE_NOUN, rng)
    )
}

pub fn award_phrase(rng: &mut Rng) -> String {
    format!(
        "{} {} {}",
        pick(&PLACE_A, rng),
        pick(&AWARD_FIELD, rng),
        pick(&AWARD_NOUN, rng)
    )
}

pub fn occupation_phrase(rng: &mut Rng) -> String {
    format!(
        "{} {} {}",
        pick(&OCC_ADJ, rng),
        pick(&OCC_ADJ, rng),
        pick(&OCC_NOUN, rng)
    )
}

pub fn university_phrase(rng: &mut Rng) -> String {
    format!(
        "{} {} {}",
        pick(&PLACE_A, rng),
        pick(&UNI_FIELD, rng),
        pick(&UNI_NOUN, rng)
    )
}

pub fn theme_phrase(rng: &mut Rng) -> String {
    // four distinct themes
    let idx = rng.sample_indices(THEME.len(), 4);
    idx.iter()
        .map(|&i| THEME[i])
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn character_phrase(rng: &mut Rng) -> String {
    format!(
        "{} {} the {}",
        pick(&FIRST_NAMES, rng),
        pick(&LAST_NAMES, rng),
        pick(&EPITHET, rng)
    )
}

pub fn person_name(rng: &mut Rng) -> String {
    format!("{} {}", pick(&FIRST_NAMES, rng), pick(&LAST_NAMES, rng))
}
