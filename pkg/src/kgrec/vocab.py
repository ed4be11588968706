"""Fixed vocabulary for vehicle descriptions and user preference profiles."""

from __future__ import annotations

from .terms import OWL, RDF, XSD, Iri

UVSO = "http://utc.fr/uvso/ns#"
UVO = "http://utc.fr/uvo/ns#"
UVOO = "http://utc.fr/uvoo/ns#"
UPO = "http://utc.fr/upo/ns#"
GR = "http://purl.org/goodrelations/v1#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"

PREFIXES: dict[str, str] = {
    "rdf": RDF,
    "rdfs": RDFS,
    "xsd": XSD,
    "owl": OWL,
    "uvso": UVSO,
    "uvo": UVO,
    "uvoo": UVOO,
    "upo": UPO,
    "gr": GR,
}

RDF_TYPE = Iri(RDF + "type")
OWL_SAMEAS = Iri(OWL + "sameAs")

# Classes
AUTOMOBILE = Iri(UVSO + "Automobile")
CONTROLE_TECHNIQUE = Iri(UVSO + "ContrôleTechnique")
FABRICANT = Iri(UVSO + "Fabricant")
PREFERENCE_DE_VEHICULE = Iri(UPO + "PréférenceDeVéhicule")
UTILISATEUR = Iri(UPO + "Utilisateur")

# Vehicle properties
NOM = Iri(UVSO + "nom")
COULEUR = Iri(UVSO + "couleur")
NOMBRE_DE_PLACES = Iri(UVSO + "nombreDePlaces")
A_VALEUR_ENTIER = Iri(GR + "aValeurEntier")
A_FABRICANT = Iri(UVSO + "AFabricant")
STYLE_VEHICULE = Iri(UVSO + "StyleVehicule")
KILOMETRAGE_ODOMETRE = Iri(UVSO + "KilometrageOdometre")
A_VALEUR_FLOAT = Iri(GR + "aValeurFloat")
ESTIMATION = Iri(UVO + "Estimation")
A_VALEUR_MONETAIRE = Iri(UVOO + "aValeurMonetaire")
ANNEE_DU_MODELE = Iri(UVSO + "anneeDuModele")
DATE_DE_PRODUCTION = Iri(UVSO + "dateDeProduction")
INSPECTE = Iri(UVSO + "inspecté")
VALIDE_DE = Iri(UVSO + "valideDe")
EST_REQUIS = Iri(UVSO + "estRequis")

# Profile properties
A_PREFERENCE = Iri(UPO + "aPréférence")
A_LE_TYPE_DE_ROUTE_PREFERE = Iri(UPO + "aLeTypeDeRoutePréféré")
A_UN_TYPE_DE_VEHICULE_PREFERE = Iri(UPO + "aUnTypeDeVéhiculePréféré")
A_PROFIL = Iri(UPO + "aProfil")
A_COULEUR_PREFEREE = Iri(UPO + "aCouleurPréférée")
A_NOMBRE_DE_SIEGES = Iri(UPO + "aNombreDeSièges")
A_MAX_KILOMETRAGE = Iri(UPO + "aMaxKilométrage")
A_MARQUE_PREFEREE = Iri(UPO + "aMarquePréférée")
A_MAX_BUDGET = Iri(UPO + "aMaxBudget")
A_NOMBRE_DE_PLACES_MINIMUM = Iri(UPO + "aNombreDePlacesMinimum")

# Value domains
VEHICLE_TYPES = {
    "sedan": Iri(UPO + "Sedan"),
    "suv": Iri(UPO + "SUV"),
    "crossover": Iri(UPO + "Crossover"),
    "van": Iri(UPO + "Van"),
}
ROUTE_TYPES = {
    "longDistance": Iri(UPO + "longDistanceRoute"),
    "city": Iri(UPO + "cityRoute"),
    "mixed": Iri(UPO + "mixedRoute"),
}
USER_PROFILES = {
    "utilisateurEtudiant": Iri(UPO + "utilisateurEtudiant"),
    "utilisateurParent": Iri(UPO + "utilisateurParent"),
    "profilProfessionnel": Iri(UPO + "profilProfessionnel"),
}
BRANDS = ("peugeot", "renault", "citroen", "audi", "volkswagen", "toyota", "bmw", "fiat")
COLORS = ("blanc", "noir", "bleu", "rouge", "gris", "vert")
MODEL_YEARS = (2018, 2019, 2020, 2021)

# Feminine / plural spellings users write, mapped to the stem stored on vehicles.
COLOR_STEMS = {
    "blanc": "blanc", "blanche": "blanc", "blancs": "blanc", "blanches": "blanc",
    "noir": "noir", "noire": "noir", "noirs": "noir", "noires": "noir",
    "bleu": "bleu", "bleue": "bleu", "bleus": "bleu", "bleues": "bleu",
    "rouge": "rouge", "rouges": "rouge",
    "gris": "gris", "grise": "gris", "grises": "gris",
    "vert": "vert", "verte": "vert", "verts": "vert", "vertes": "vert",
}

PROPERTIES = (
    NOM, COULEUR, NOMBRE_DE_PLACES, A_VALEUR_ENTIER, A_FABRICANT, STYLE_VEHICULE,
    KILOMETRAGE_ODOMETRE, A_VALEUR_FLOAT, ESTIMATION, A_VALEUR_MONETAIRE, ANNEE_DU_MODELE,
    DATE_DE_PRODUCTION, INSPECTE, VALIDE_DE, EST_REQUIS, A_PREFERENCE,
    A_LE_TYPE_DE_ROUTE_PREFERE, A_UN_TYPE_DE_VEHICULE_PREFERE, A_PROFIL, A_COULEUR_PREFEREE,
    A_NOMBRE_DE_SIEGES, A_MAX_KILOMETRAGE, A_MARQUE_PREFEREE, A_MAX_BUDGET,
    A_NOMBRE_DE_PLACES_MINIMUM, RDF_TYPE, OWL_SAMEAS,
)
CLASSES = (AUTOMOBILE, CONTROLE_TECHNIQUE, FABRICANT, PREFERENCE_DE_VEHICULE, UTILISATEUR)


def brand_iri(name: str) -> Iri:
    return Iri(UVSO + name.lower())


def color_stem(color: str) -> str:
    c = color.strip().lower()
    return COLOR_STEMS.get(c, c)


def expand(name: str, prefixes: dict[str, str] | None = None) -> str:
    """Expand ``prefix:local`` against ``prefixes``; full IRIs pass through."""
    prefixes = PREFIXES if prefixes is None else prefixes
    if name.startswith("<") and name.endswith(">"):
        return name[1:-1]
    if ":" in name:
        pfx, local = name.split(":", 1)
        if pfx in prefixes:
            return prefixes[pfx] + local
    return name
