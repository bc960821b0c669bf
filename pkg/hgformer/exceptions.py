# Copyright (c) 2026 hgformer authors
#
# SPDX-License-Identifier: BSD-3-Clause
# The BSD-3-Clause license for this file can be found in the LICENSE file included with this distribution
# or at https://spdx.org/licenses/BSD-3-Clause.html#licenseText


########################################################################################################################
# HGFormer Exceptions
########################################################################################################################

class HGFormerError(Exception):
    """
    HGFormer Module: Base Exception
    """
    fmt = 'HGFormer ERROR: {description}'

    def __init__(self, desc=None):
        super().__init__(desc)
        self.description = "Unknown Error" if desc is None else desc

    def __str__(self):
        return self.fmt.format(description=self.description)


class ArgumentError(HGFormerError):
    """
    HGFormer Module: Invalid Argument Exception
    """
    fmt = 'HGFormer ERROR: Invalid argument -> {description}'


class DimensionError(HGFormerError):
    """
    HGFormer Module: Shape Mismatch Exception
    """
    fmt = 'HGFormer ERROR: Dimension mismatch -> {description}'

    def __init__(self, desc=None, *shapes):
        super().__init__(desc)
        self.shapes = tuple(tuple(s) for s in shapes)

    def __str__(self):
        text = self.fmt.format(description=self.description)
        if self.shapes:
            text += " [" + " vs ".join(str(s) for s in self.shapes) + "]"
        return text


class SingularDegreeError(HGFormerError):
    """
    HGFormer Module: Non-invertible Degree Matrix Exception
    """
    fmt = 'HGFormer ERROR: Singular degree -> {description}'

    def __init__(self, desc=None, nodes=()):
        super().__init__(desc)
        self.nodes = tuple(int(n) for n in nodes)


class DegenerateAttentionError(HGFormerError):
    """
    HGFormer Module: Literal Attention Denominator Exception
    """
    fmt = 'HGFormer ERROR: Degenerate attention in batch item {index} -> {description}'

    def __init__(self, desc=None, index=0):
        super().__init__(desc)
        self.index = int(index)

    def __str__(self):
        return self.fmt.format(index=self.index, description=self.description)


class NumericError(HGFormerError):
    """
    HGFormer Module: Non-finite Value Exception
    """
    fmt = 'HGFormer ERROR: Numeric failure -> {description}'

    def __init__(self, desc=None, components=None):
        super().__init__(desc)
        self.components = dict(components or {})

    def __str__(self):
        text = self.fmt.format(description=self.description)
        if self.components:
            text += "".join(f"\n  {name}: {value!r}" for name, value in self.components.items())
        return text


class ParseError(HGFormerError):
    """
    HGFormer Module: Dataset Parsing Exception
    """
    fmt = 'HGFormer ERROR: {path}:{line} -> {description}'

    def __init__(self, desc=None, path='<memory>', line=0):
        super().__init__(desc)
        self.path = str(path)
        self.line = int(line)

    def __str__(self):
        return self.fmt.format(path=self.path, line=self.line, description=self.description)


class ConfigError(HGFormerError):
    """
    HGFormer Module: Configuration Exception
    """
    fmt = 'HGFormer ERROR: Config issue -> {description}'


class GradCheckError(HGFormerError):
    """
    HGFormer Module: Gradient Check Exceedance
    """
    fmt = 'HGFormer ERROR: Gradient check failed -> {description}'

    def __init__(self, desc=None, groups=None):
        super().__init__(desc)
        self.groups = dict(groups or {})
