from .encoders import DictionaryEncoder, HashBitmapEncoder, like_mode
from .hashing import hash_bitmap
from .patterns import P_C, P_l, P_n, P_s, P_t, PREFIX, SUFFIX, PatternToken, QueryNotFound, Rule, apply_rule, generate_candidate_rules
from .selection import InfeasibleBudget, SubstringDictionary, build_dictionary, select_rules
from .skipgram import train_skipgram
from .trie import Trie, TriePair, build_tries
