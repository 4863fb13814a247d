"""Version information from git repository."""
from pathlib import Path

from git import Repo
from loguru import logger

from mumkit import __version__


def get_version_from_git() -> str:
    """
    Get version string from git repository status.

    Returns:
        str: "{branch_name} ({short_commit_hash})", or "unknown (no-git)"
        outside a git checkout

    Example:
        "main (a1b2c3d)"
    """
    try:
        repo = Repo(Path(__file__), search_parent_directories=True)
        commit_hash = repo.head.commit.hexsha[:7]
        # detached heads (CI checkouts) have no active branch
        branch_name = "detached" if repo.head.is_detached else repo.active_branch.name
        version = f"{branch_name} ({commit_hash})"
        logger.debug(f"Git version: {version}")
        return version
    except Exception as e:
        logger.warning(f"Failed to get git version: {e}")
        return "unknown (no-git)"


def version_stamp() -> str:
    """Package version plus git state, written into run artifacts."""
    return f"mumkit {__version__} / {get_version_from_git()}"
