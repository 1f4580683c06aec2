# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT


class Gruvbox:
    bg0 = "#fbf1c7"
    fg0 = "#282828"
    fg4 = "#7c6f64"

    dark_red = "#cc241d"
    dark_green = "#98971a"
    dark_yellow = "#d79921"
    dark_blue = "#458588"
    dark_purple = "#b16286"
    dark_aqua = "#689d6a"
    dark_orange = "#d65d0e"
    dark_gray = "#928374"


# One color per agent, cycled when there are more agents than colors.
AGENT_COLORS = [
    Gruvbox.dark_blue,
    Gruvbox.dark_red,
    Gruvbox.dark_green,
    Gruvbox.dark_purple,
    Gruvbox.dark_orange,
    Gruvbox.dark_aqua,
    Gruvbox.dark_yellow,
]

MARKER_COLOR = Gruvbox.fg0
AVERAGE_COLOR = Gruvbox.dark_gray


def agent_color(i: int) -> str:
    return AGENT_COLORS[i % len(AGENT_COLORS)]
