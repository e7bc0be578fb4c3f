from .model import GRAPH_SCHEMA, AdjacencyMatrix, FileNode, MethodNode, RepoModel, build_adjacency
from .parse import parse_repository
from .profiles import JavaProfile, LanguageProfile, get_profile

__all__ = [
    "GRAPH_SCHEMA",
    "AdjacencyMatrix",
    "FileNode",
    "JavaProfile",
    "LanguageProfile",
    "MethodNode",
    "RepoModel",
    "build_adjacency",
    "get_profile",
    "parse_repository",
]
