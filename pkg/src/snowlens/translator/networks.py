"""U-Net generator and patch discriminator for paired image translation."""
import torch
from torch import nn


def _norm(channels, kind):
    if kind == "instance":
        return nn.InstanceNorm2d(channels, affine=True)
    if kind == "batch":
        return nn.BatchNorm2d(channels)
    raise ValueError(f"unknown norm {kind!r}")


def level_channels(depth, base_channels, cap_multiplier=8):
    return [base_channels * min(2 ** i, cap_multiplier) for i in range(depth)]


class UNetGenerator(nn.Module):
    """Encoder-decoder with a skip connection at every resolution level.

    Each encoder level halves the spatial size with a 4x4 stride-2
    convolution, so inputs must be multiples of ``2 ** depth``. The output
    passes through ``tanh`` and is therefore bounded to [-1, 1].
    """

    def __init__(self, depth=6, base_channels=16, dropout=0.0, norm="instance", in_channels=3,
                 out_channels=3):
        super().__init__()
        if depth < 2:
            raise ValueError("generator depth must be at least 2")
        self.depth = depth
        ch = level_channels(depth, base_channels)
        self.down = nn.ModuleList()
        for i in range(depth):
            layers = [] if i == 0 else [nn.LeakyReLU(0.2)]
            layers.append(nn.Conv2d(in_channels if i == 0 else ch[i - 1], ch[i], 4, 2, 1,
                                    bias=i in (0, depth - 1)))
            if 0 < i < depth - 1:
                layers.append(_norm(ch[i], norm))
            self.down.append(nn.Sequential(*layers))
        self.up = nn.ModuleList()
        for i in range(depth):
            in_ch = ch[i] if i == depth - 1 else 2 * ch[i]
            if i == 0:
                layers = [nn.ReLU(), nn.ConvTranspose2d(in_ch, out_channels, 4, 2, 1), nn.Tanh()]
            else:
                layers = [nn.ReLU(), nn.ConvTranspose2d(in_ch, ch[i - 1], 4, 2, 1, bias=False),
                          _norm(ch[i - 1], norm)]
                # dropout on the innermost decoder levels, as in the reference design
                if dropout > 0 and i >= depth - 3:
                    layers.append(nn.Dropout(dropout))
            self.up.append(nn.Sequential(*layers))

    def bottleneck_shape(self, height, width):
        return height // 2 ** self.depth, width // 2 ** self.depth

    def forward(self, x):
        skips = []
        h = x
        for block in self.down:
            h = block(h)
            skips.append(h)
        h = self.up[-1](skips[-1])
        for i in range(self.depth - 2, -1, -1):
            h = self.up[i](torch.cat([h, skips[i]], dim=1))
        return h


class PatchDiscriminator(nn.Module):
    """Scores local patches of a channel-concatenated (condition, candidate) pair.

    ``n_strided`` 4x4 stride-2 blocks are followed by two 4x4 stride-1 blocks;
    the last one emits a single-channel logit grid.
    """

    def __init__(self, base_channels=16, n_strided=3, norm="instance", in_channels=6):
        super().__init__()
        self.n_strided = n_strided
        layers = [nn.Conv2d(in_channels, base_channels, 4, 2, 1), nn.LeakyReLU(0.2)]
        ch = base_channels
        for i in range(1, n_strided):
            nxt = base_channels * min(2 ** i, 8)
            layers += [nn.Conv2d(ch, nxt, 4, 2, 1, bias=False), _norm(nxt, norm), nn.LeakyReLU(0.2)]
            ch = nxt
        nxt = base_channels * min(2 ** n_strided, 8)
        layers += [nn.Conv2d(ch, nxt, 4, 1, 1, bias=False), _norm(nxt, norm), nn.LeakyReLU(0.2)]
        layers.append(nn.Conv2d(nxt, 1, 4, 1, 1))
        self.net = nn.Sequential(*layers)

    def grid_shape(self, height, width):
        """Spatial size of the score grid for a ``height x width`` input."""
        def conv(n, stride):
            return (n + 2 - 4) // stride + 1

        for _ in range(self.n_strided):
            height, width = conv(height, 2), conv(width, 2)
        for _ in range(2):
            height, width = conv(height, 1), conv(width, 1)
        return height, width

    def forward(self, condition, candidate):
        return self.net(torch.cat([condition, candidate], dim=1))


def init_weights(module, gain=0.02):
    """Normal(0, 0.02) conv weights, Normal(1, 0.02) norm scales, zero biases."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, gain)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (nn.BatchNorm2d, nn.InstanceNorm2d)) and m.weight is not None:
            nn.init.normal_(m.weight, 1.0, gain)
            nn.init.zeros_(m.bias)
