"""Lock-free data structures built on LLX/SCX, and a k-CAS with reusable descriptors."""

from .sync import FAIL, FINALIZED, DataRecord, Snapshot, llx, scx, vlx
from .multiset import Multiset
from .chromatic import ChromaticTree
from .ravl import RavlTree
from .abtree import ABTree
from .kcas import KcasDomain, KcasEntry, WordArray
from .reclaim import EpochReclaimer

__all__ = ["FAIL", "FINALIZED", "DataRecord", "Snapshot", "llx", "scx", "vlx", "Multiset",
           "ChromaticTree", "RavlTree", "ABTree", "KcasDomain", "KcasEntry", "WordArray",
           "EpochReclaimer"]
