"""Word lists backing the built-in tagger and lemmatizer.

Bump ``LEXICON_VERSION`` whenever any list changes; it is recorded with
preprocessed output so cached corpora can be invalidated.
"""

LEXICON_VERSION = "1.0"


def _words(s: str) -> frozenset[str]:
    return frozenset(s.split())


AUX_WORDS = _words(
    """
    be am is are was were been being 's 're 'm
    can could ca will would wo 'll 'd shall sha should may might must ought
    """
)

# "do" and "have" are AUX only in auxiliary position; resolved in context
DO_FORMS = _words("do does did doing done")
HAVE_FORMS = _words("have has had having 've")

PRON_WORDS = _words(
    """
    i me my mine myself you your yours yourself yourselves he him his himself
    she her hers herself it its itself we us our ours ourselves they them
    their theirs themselves what who whom whose which whatever whoever
    someone somebody something anyone anybody anything everyone everybody
    everything nobody nothing this these those
    """
)

DET_WORDS = _words(
    "a an the some any no every each either neither another such half all both"
)

ADP_WORDS = _words(
    """
    of in on at by for with about against between into through during before
    after above below from up down out off over under again via per without
    within along across behind beyond around among upon towards toward than
    like since until till despite onto
    """
)

CCONJ_WORDS = _words("and or but nor yet plus")
SCONJ_WORDS = _words("if because although though unless whether while whereas that so once")
PART_WORDS = _words("not n't to")
INTJ_WORDS = _words(
    "yes no oh hi hello hey thanks thank please plz pls ok okay wow yeah yep nope sorry lol"
)

ADV_WORDS = _words(
    """
    just also very now here there then still already again too soon maybe perhaps
    really quite even only always never ever often sometimes usually actually
    probably definitely certainly well back instead anyway anyways otherwise
    currently recently finally meanwhile where when how why however therefore
    thus hence indeed almost rather away further furthermore more most less least
    yet else later ago today tomorrow yesterday asap together first
    """
)

ADJ_WORDS = _words(
    """
    same different new old other good bad great fine able unable possible
    impossible related relevant similar correct wrong incorrect sure happy glad
    free open closed stale latest last next previous current available missing
    broken stable unstable fresh full better best worse worst certain clear
    unclear interesting useful helpful likely unlikely nice official specific
    enough own many much few several little big small large simple easy hard
    more safe due unrelated outdated obsolete invalid
    """
)

# base forms that are (almost) always verbs in issue discussions
VERB_LEMMAS = _words(
    """
    provide give upload share post attach send paste show add remove delete
    try install uninstall reinstall run rerun agree confirm reproduce
    see get go make take know think want like seem look find keep let tell
    ask mind happen appear become begin start stop mean put set come leave
    call bring write read hear reopen merge rebase compile download
    check include explain describe clarify verify investigate consider
    submit open close fix update upgrade downgrade migrate suggest recommend
    propose prefer expect solve resolve implement handle accept reject
    experience encounter face notice observe assume guess believe
    discuss move redirect refer point track mark label assign
    contribute volunteer pick tackle
    enable disable configure restart reboot clean clear switch change use
    work help need fail crash break
    be have do
    """
)

# noun/verb ambiguous lemmas: VERB after AUX/PRON/to/please, NOUN otherwise
AMBIGUOUS_NOUN_VERB = _words(
    """
    duplicate fix update report test work need help patch release change
    close open build support answer reply issue question request comment
    upgrade crash reopen
    """
)

# nouns frequently seen in the corpus; used to validate suffix stripping
NOUN_LEMMAS = _words(
    """
    issue version error information info step code bug problem pr repo
    repository project commit branch package library file line log output
    message detail reproduction example case test doc documentation page
    link question answer thread ticket discussion forum channel site tracker
    solution workaround alternative idea suggestion option setting config
    system machine build release tag feature request change patch fix update
    lack reason time day week moment mode date user developer maintainer team
    sipa boost homebrew binutils core bitcoin atom master window instruction
    dockerfile docker image screenshot trace stack stacktrace report
    """
)

# irregular forms -> lemma
IRREGULAR_LEMMAS = {
    "am": "be", "is": "be", "are": "be", "was": "be", "were": "be",
    "been": "be", "being": "be", "'s": "be", "'re": "be", "'m": "be",
    "has": "have", "had": "have", "having": "have", "'ve": "have",
    "does": "do", "did": "do", "done": "do", "doing": "do",
    "going": "go", "using": "use",
    "ca": "can", "wo": "will", "'ll": "will", "'d": "would", "sha": "shall",
    "n't": "not",
    "went": "go", "gone": "go", "got": "get", "gotten": "get",
    "made": "make", "took": "take", "taken": "take", "gave": "give",
    "given": "give", "saw": "see", "seen": "see", "knew": "know",
    "known": "know", "thought": "think", "said": "say", "told": "tell",
    "found": "find", "came": "come", "left": "leave", "kept": "keep",
    "brought": "bring", "wrote": "write", "written": "write", "ran": "run",
    "began": "begin", "begun": "begin", "broke": "break", "broken": "break",
    "chose": "choose", "chosen": "choose", "meant": "mean", "sent": "send",
    "built": "build", "spent": "spend", "felt": "feel", "heard": "hear",
    "held": "hold", "led": "lead", "lost": "lose", "paid": "pay",
    "understood": "understand", "stuck": "stick", "forgot": "forget",
    "forgotten": "forget", "threw": "throw", "thrown": "throw",
    "children": "child", "men": "man", "women": "woman", "people": "person",
    "feet": "foot", "data": "data", "this": "this", "its": "its",
    "us": "we", "me": "i", "him": "he", "them": "they",
}

# participles recognised after "have" to mark it as an auxiliary
IRREGULAR_PARTICIPLES = _words(
    """
    been done gone gotten got made taken given seen known thought said told
    found left kept brought written begun broken chosen meant sent built spent
    felt heard held led lost paid understood stuck forgotten thrown run come
    put set read
    """
)

# a period after one of these does not end a sentence
ABBREVIATIONS = _words("e.g i.e etc vs cf approx mr mrs ms dr no fig eq")

CONTRACTION_SUFFIXES = ("n't", "'re", "'ve", "'ll", "'d", "'m", "'s")
