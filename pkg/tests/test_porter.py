"""Stemmer checks against the algorithm's published per-rule examples."""

import pytest

from medrank import porter

STEP1A = [
    ("caresses", "caress"),
    ("ponies", "poni"),
    ("ties", "ti"),
    ("caress", "caress"),
    ("cats", "cat"),
]

STEP1B = [
    ("feed", "feed"),
    ("agreed", "agree"),
    ("plastered", "plaster"),
    ("bled", "bled"),
    ("motoring", "motor"),
    ("sing", "sing"),
    ("conflated", "conflate"),
    ("troubled", "trouble"),
    ("sized", "size"),
    ("hopping", "hop"),
    ("tanned", "tan"),
    ("falling", "fall"),
    ("hissing", "hiss"),
    ("fizzed", "fizz"),
    ("failing", "fail"),
    ("filing", "file"),
]

STEP1C = [("happy", "happi"), ("sky", "sky")]

STEP2 = [
    ("relational", "relate"),
    ("conditional", "condition"),
    ("rational", "rational"),
    ("valenci", "valence"),
    ("hesitanci", "hesitance"),
    ("digitizer", "digitize"),
    ("conformabli", "conformable"),
    ("radicalli", "radical"),
    ("differentli", "different"),
    ("vileli", "vile"),
    ("analogousli", "analogous"),
    ("vietnamization", "vietnamize"),
    ("predication", "predicate"),
    ("operator", "operate"),
    ("feudalism", "feudal"),
    ("decisiveness", "decisive"),
    ("hopefulness", "hopeful"),
    ("callousness", "callous"),
    ("formaliti", "formal"),
    ("sensitiviti", "sensitive"),
    ("sensibiliti", "sensible"),
]

STEP3 = [
    ("triplicate", "triplic"),
    ("formative", "form"),
    ("formalize", "formal"),
    ("electriciti", "electric"),
    ("electrical", "electric"),
    ("hopeful", "hope"),
    ("goodness", "good"),
]

STEP4 = [
    ("revival", "reviv"),
    ("allowance", "allow"),
    ("inference", "infer"),
    ("airliner", "airlin"),
    ("gyroscopic", "gyroscop"),
    ("adjustable", "adjust"),
    ("defensible", "defens"),
    ("irritant", "irrit"),
    ("replacement", "replac"),
    ("adjustment", "adjust"),
    ("dependent", "depend"),
    ("adoption", "adopt"),
    ("homologou", "homolog"),
    ("communism", "commun"),
    ("activate", "activ"),
    ("angulariti", "angular"),
    ("homologous", "homolog"),
    ("effective", "effect"),
    ("bowdlerize", "bowdler"),
]

STEP5 = [
    ("probate", "probat"),
    ("rate", "rate"),
    ("cease", "ceas"),
    ("controll", "control"),
    ("roll", "roll"),
]


@pytest.mark.parametrize("word,expected", STEP1A)
def test_step1a(word, expected):
    assert porter._step1a(word) == expected


@pytest.mark.parametrize("word,expected", STEP1B)
def test_step1b(word, expected):
    assert porter._step1b(word) == expected


@pytest.mark.parametrize("word,expected", STEP1C)
def test_step1c(word, expected):
    assert porter._step1c(word) == expected


@pytest.mark.parametrize("word,expected", STEP2)
def test_step2(word, expected):
    assert porter._step2(word) == expected


@pytest.mark.parametrize("word,expected", STEP3)
def test_step3(word, expected):
    assert porter._step3(word) == expected


@pytest.mark.parametrize("word,expected", STEP4)
def test_step4(word, expected):
    assert porter._step4(word) == expected


@pytest.mark.parametrize("word,expected", STEP5)
def test_step5(word, expected):
    assert porter._step5(word) == expected


def test_full_pipeline_worked_examples():
    # multi-step derivations quoted with the algorithm
    assert porter.stem("generalizations") == "gener"
    assert porter.stem("oscillators") == "oscil"


def test_full_pipeline_spec_words():
    assert porter.stem("coronavirus") == "coronaviru"
    assert porter.stem("related") == "relat"
    assert porter.stem("deaths") == "death"


def test_short_words_untouched():
    assert porter.stem("as") == "as"
    assert porter.stem("is") == "is"
    assert porter.stem("a") == "a"


def test_case_insensitive():
    assert porter.stem("Deaths") == "death"


def test_measure():
    assert porter._measure("tr") == 0
    assert porter._measure("ee") == 0
    assert porter._measure("tree") == 0
    assert porter._measure("trouble") == 1
    assert porter._measure("oats") == 1
    assert porter._measure("private") == 2
    assert porter._measure("oaten") == 2
