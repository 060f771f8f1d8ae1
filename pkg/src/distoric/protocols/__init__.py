"""GHZ protocol trees, their compilation to recipes, execution and search."""
from .builtin import BUILTIN, builtin_tree
from .execute import ExecutionResult, execute_recipe
from .operations import distill, fuse
from .recipe import (
    Instruction, ProtocolRecipe, TimedTree, compile_recipe, recipe_for, recipe_from_text, schedule_tree,
    validate_recipe,
)
from .search import Candidate, SearchConfig, SearchResult, dynamic_search
from .tree import BellLink, Distill, Fusion, canonical_form, encode, ghz_stabilizers, isomorphic, parse_tree

__all__ = [
    "BUILTIN", "builtin_tree", "ExecutionResult", "execute_recipe", "distill", "fuse", "Instruction",
    "ProtocolRecipe", "TimedTree", "compile_recipe", "recipe_for", "recipe_from_text", "schedule_tree",
    "validate_recipe", "Candidate", "SearchConfig", "SearchResult", "dynamic_search", "BellLink", "Distill",
    "Fusion", "canonical_form", "encode", "ghz_stabilizers", "isomorphic", "parse_tree",
]
