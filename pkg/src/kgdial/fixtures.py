"""A small bundled hotel corpus: 8 parking/amenity FAQ snippets and one
detected question whose text duplicates the first snippet's title, so an
exact-match-weighted selector must rank that snippet first.
"""

from __future__ import annotations

from .corpus import Corpus, DialogInstance, DialogTurn, KnowledgeSnippet, SnippetRef, Speaker

HOTEL_QUESTION = "Does the hotel offer accessible parking?"

_TITLES = [
    "Does the hotel offer accessible parking?",
    "Is there on-site private parking at the Bridge Guest House?",
    "Do I have to pay for parking?",
    "Is there a cost for parking?",
    "Can I make a reservation for parking?",
    "Do they have help for disabled parking?",
    "Do you provide room service daily?",
    "Are there any fitness center or gym?",
]


def hotel_corpus() -> Corpus:
    """Corpus with one hotel entity, its 8 snippets, and one labeled dialog.

    The dialog's single user turn equals snippet 0's title and snippet 0 is
    the golden reference.
    """
    entity = ("hotel", "1")
    snippets = [
        KnowledgeSnippet(entity[0], entity[1], str(i), title, "")
        for i, title in enumerate(_TITLES)
    ]
    dialog = DialogInstance(
        "d0000",
        (DialogTurn(Speaker.USER, HOTEL_QUESTION),),
        target=True,
        golden=SnippetRef(entity[0], entity[1], "0"),
    )
    return Corpus({entity: snippets}, [dialog], {entity: "Bridge Guest House"})
